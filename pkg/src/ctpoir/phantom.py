"""Deterministic synthetic CT phantoms with exact ground-truth masks.

A phantom is a body cylinder of soft tissue in exterior air, two ellipsoidal
lungs, and lesion blobs inside the lungs. Ground-truth masks are the exact
rasterized ellipsoid voxel sets; HU noise never moves them. Optional decoy
structures (a thin bright-walled air tube inside a lung and a blur band just
outside a lung boundary) mimic the healthy structures that a naive
segmentation picks up by mistake.

All randomness comes from numpy's PCG64 generator seeded from the spec, with
a fixed draw order (lung 0, lung 1, lesions in list order, tube wall, blur
band), so one seed always produces a bit-identical phantom.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import dicom
from .errors import SpecViolation
from .volume import BinaryMask3D, CtVolume, round_half_away_from_zero


@dataclass(frozen=True)
class Blob:
    """Axis-aligned ellipsoid with a gaussian HU distribution."""

    center: tuple[float, float, float]     # (x, y, z) voxels
    radii: tuple[float, float, float]
    hu_mean: float
    hu_sigma: float

    def contains_grid(self, dims) -> np.ndarray:
        nx, ny, nz = dims
        x = np.arange(nx, dtype=np.float64)[None, None, :]
        y = np.arange(ny, dtype=np.float64)[None, :, None]
        z = np.arange(nz, dtype=np.float64)[:, None, None]
        cx, cy, cz = self.center
        rx, ry, rz = self.radii
        return (((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2 + ((z - cz) / rz) ** 2) <= 1.0


@dataclass(frozen=True)
class TubeDecoy:
    """Thin bright-walled tube along z: air lumen, soft-tissue wall."""

    center_xy: tuple[float, float]
    outer_radius: float = 4.0
    wall_thickness: float = 1.5
    z_range: tuple[int, int] = (6, 26)     # half-open
    wall_hu_mean: float = -80.0
    wall_hu_sigma: float = 30.0
    lumen_hu: float = -1000.0


@dataclass(frozen=True)
class BorderBlurDecoy:
    """Band just outside a lung boundary with intermediate HU (partial volume)."""

    lung_index: int = 0
    thickness: float = 2.5                 # voxels added to each lung radius
    hu_mean: float = -120.0
    hu_sigma: float = 30.0


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int, int] = (128, 128, 32)
    spacing: tuple[float, float, float] = (0.7, 0.7, 5.0)
    seed: int = 20200131
    case_id: str = "phantom"
    lungs: tuple[Blob, Blob] = (
        Blob(center=(40.0, 63.5, 15.5), radii=(18.0, 25.0, 11.0), hu_mean=-650.0, hu_sigma=50.0),
        Blob(center=(87.0, 63.5, 15.5), radii=(18.0, 25.0, 11.0), hu_mean=-650.0, hu_sigma=50.0),
    )
    lesions: tuple[Blob, ...] = ()
    body_hu: float = 40.0
    air_hu: float = -1000.0
    body_semiaxes: tuple[float, float] = (56.0, 50.0)
    tube: TubeDecoy | None = None
    border_blur: BorderBlurDecoy | None = None

    @classmethod
    def default(cls, seed: int = 20200131, case_id: str = "phantom") -> "PhantomSpec":
        """Two lungs at -650±50 HU with lesions at -100±80 inside them."""
        return cls(seed=seed, case_id=case_id, lesions=(
            Blob(center=(40.0, 55.0, 15.0), radii=(9.23, 10.26, 5.13), hu_mean=-100.0, hu_sigma=80.0),
            Blob(center=(87.0, 70.0, 17.0), radii=(8.21, 9.23, 5.13), hu_mean=-100.0, hu_sigma=80.0),
            Blob(center=(42.0, 75.0, 13.0), radii=(6.16, 6.16, 3.08), hu_mean=-100.0, hu_sigma=80.0),
        ))

    @classmethod
    def separated(cls, seed: int = 20200131, case_id: str = "phantom-sep") -> "PhantomSpec":
        """HU-separable variant: dark parenchyma (-850±40), mid-range lesions
        (-450±80), so the canonical fixed thresholds (-200 lung, -750 lesion
        subtraction) recover both structures well."""
        spec = cls.default(seed=seed, case_id=case_id)
        lungs = tuple(replace(b, hu_mean=-850.0, hu_sigma=40.0) for b in spec.lungs)
        lesions = tuple(replace(b, hu_mean=-450.0, hu_sigma=80.0) for b in spec.lesions)
        return replace(spec, lungs=lungs, lesions=lesions)

    def with_decoys(self) -> "PhantomSpec":
        return replace(
            self,
            tube=TubeDecoy(center_xy=(87.0, 50.0)),
            border_blur=BorderBlurDecoy(lung_index=0),
        )


def _validate(spec: PhantomSpec) -> None:
    nx, ny, nz = spec.dims
    if min(spec.dims) < 1 or min(spec.spacing) <= 0:
        raise SpecViolation(f"bad dims/spacing: {spec.dims} {spec.spacing}")
    for blob in (*spec.lungs, *spec.lesions):
        if blob.hu_sigma < 0:
            raise SpecViolation(f"negative HU sigma on blob at {blob.center}")
        if min(blob.radii) <= 0:
            raise SpecViolation(f"non-positive radius on blob at {blob.center}")
    if len(spec.lungs) != 2:
        raise SpecViolation("exactly two lungs are required")


def make_phantom(spec: PhantomSpec) -> tuple[CtVolume, BinaryMask3D, BinaryMask3D]:
    """Rasterize a spec into (volume, gt_lung, gt_infected)."""
    _validate(spec)
    nx, ny, nz = spec.dims
    rng = np.random.default_rng(np.random.PCG64(spec.seed))

    x = np.arange(nx, dtype=np.float64)[None, None, :]
    y = np.arange(ny, dtype=np.float64)[None, :, None]
    bx, by = spec.body_semiaxes
    body2d = ((x - (nx - 1) / 2.0) / bx) ** 2 + ((y - (ny - 1) / 2.0) / by) ** 2 <= 1.0
    body = np.broadcast_to(body2d, (nz, ny, nx)).copy()

    hu = np.full((nz, ny, nx), spec.air_hu, dtype=np.float64)
    hu[body] = spec.body_hu

    lung_bits = np.zeros((nz, ny, nx), dtype=bool)
    for lung in spec.lungs:
        inside = lung.contains_grid(spec.dims)
        if (inside & ~body).any():
            raise SpecViolation(f"lung at {lung.center} extends outside the body")
        lung_bits |= inside
        hu[inside] = rng.normal(lung.hu_mean, lung.hu_sigma, int(inside.sum()))

    lesion_bits = np.zeros((nz, ny, nx), dtype=bool)
    for lesion in spec.lesions:
        inside = lesion.contains_grid(spec.dims)
        if (inside & ~lung_bits).any():
            raise SpecViolation(f"lesion at {lesion.center} extends outside the lungs")
        lesion_bits |= inside
        hu[inside] = rng.normal(lesion.hu_mean, lesion.hu_sigma, int(inside.sum()))

    if spec.tube is not None:
        t = spec.tube
        cx, cy = t.center_xy
        r2 = (x - cx) ** 2 + (y - cy) ** 2
        ring2d = r2 <= t.outer_radius ** 2
        lumen2d = r2 <= (t.outer_radius - t.wall_thickness) ** 2
        zsel = np.zeros((nz, 1, 1), dtype=bool)
        zsel[t.z_range[0]:t.z_range[1]] = True
        wall = np.broadcast_to(ring2d & ~lumen2d, (nz, ny, nx)) & zsel
        lumen = np.broadcast_to(lumen2d, (nz, ny, nx)) & zsel
        hu[wall] = rng.normal(t.wall_hu_mean, t.wall_hu_sigma, int(wall.sum()))
        hu[lumen] = t.lumen_hu

    if spec.border_blur is not None:
        b = spec.border_blur
        lung = spec.lungs[b.lung_index]
        grown = replace(lung, radii=tuple(r + b.thickness for r in lung.radii))
        band = grown.contains_grid(spec.dims) & ~lung.contains_grid(spec.dims) & body
        hu[band] = rng.normal(b.hu_mean, b.hu_sigma, int(band.sum()))

    voxels = np.clip(round_half_away_from_zero(hu), -32768, 32767).astype(np.int16)
    volume = CtVolume(voxels, spec.spacing, case_id=spec.case_id)
    return (
        volume,
        BinaryMask3D(lung_bits, spec.spacing),
        BinaryMask3D(lesion_bits, spec.spacing),
    )


def write_phantom_dicom(volume: CtVolume, directory,
                        slope: float = 1.0, intercept: float = 0.0) -> list[Path]:
    """Emit the phantom as a minimal uncompressed DICOM series."""
    return dicom.write_dicom_series(volume, directory, slope=slope, intercept=intercept)


# --- JSON spec -------------------------------------------------------------

def _blob_from_json(obj) -> Blob:
    return Blob(
        center=tuple(float(v) for v in obj["center"]),
        radii=tuple(float(v) for v in obj["radii"]),
        hu_mean=float(obj["hu_mean"]),
        hu_sigma=float(obj["hu_sigma"]),
    )


def spec_from_json(obj: dict) -> PhantomSpec:
    base = PhantomSpec.default()
    kwargs = {}
    if "dims" in obj:
        kwargs["dims"] = tuple(int(v) for v in obj["dims"])
    if "spacing" in obj:
        kwargs["spacing"] = tuple(float(v) for v in obj["spacing"])
    if "seed" in obj:
        kwargs["seed"] = int(obj["seed"])
    if "case_id" in obj:
        kwargs["case_id"] = str(obj["case_id"])
    if "body_hu" in obj:
        kwargs["body_hu"] = float(obj["body_hu"])
    if "air_hu" in obj:
        kwargs["air_hu"] = float(obj["air_hu"])
    if "body_semiaxes" in obj:
        kwargs["body_semiaxes"] = tuple(float(v) for v in obj["body_semiaxes"])
    if "lungs" in obj:
        kwargs["lungs"] = tuple(_blob_from_json(b) for b in obj["lungs"])
    if "lesions" in obj:
        kwargs["lesions"] = tuple(_blob_from_json(b) for b in obj["lesions"])
    if obj.get("tube"):
        t = obj["tube"]
        kwargs["tube"] = TubeDecoy(
            center_xy=tuple(float(v) for v in t["center_xy"]),
            outer_radius=float(t.get("outer_radius", 4.0)),
            wall_thickness=float(t.get("wall_thickness", 1.5)),
            z_range=tuple(int(v) for v in t.get("z_range", (6, 26))),
            wall_hu_mean=float(t.get("wall_hu_mean", -80.0)),
            wall_hu_sigma=float(t.get("wall_hu_sigma", 30.0)),
            lumen_hu=float(t.get("lumen_hu", -1000.0)),
        )
    if obj.get("border_blur"):
        b = obj["border_blur"]
        kwargs["border_blur"] = BorderBlurDecoy(
            lung_index=int(b.get("lung_index", 0)),
            thickness=float(b.get("thickness", 2.5)),
            hu_mean=float(b.get("hu_mean", -120.0)),
            hu_sigma=float(b.get("hu_sigma", 30.0)),
        )
    return replace(base, **kwargs)


def load_spec(path) -> PhantomSpec:
    return spec_from_json(json.loads(Path(path).read_text()))
