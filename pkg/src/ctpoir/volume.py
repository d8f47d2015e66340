"""Core volumetric containers.

All grids are stored as numpy arrays in (z, y, x) axis order, so the raw
x-fastest file layout is exactly the C-contiguous buffer. ``dims`` is always
reported as (nx, ny, nz) to match header files and physical conventions.
Instances are immutable: the backing arrays are made read-only at
construction and are safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HU_MIN, HU_MAX = -1200, 600  # clipped working window


def round_half_away_from_zero(x):
    """Deterministic scalar/array rounding: 0.5 -> 1, -0.5 -> -1."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _freeze(arr: np.ndarray) -> np.ndarray:
    if arr.base is not None or arr.flags.writeable:
        arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


def _check_geometry(voxels: np.ndarray, spacing) -> None:
    if voxels.ndim != 3 or min(voxels.shape) < 1:
        raise ValueError(f"expected a non-empty 3D grid, got shape {voxels.shape}")
    if len(spacing) != 3 or any(s <= 0 for s in spacing):
        raise ValueError(f"spacing must be three positive mm values, got {spacing}")


@dataclass(frozen=True, eq=False)
class CtVolume:
    """Signed 16-bit HU grid with physical spacing, slices ordered by z."""

    voxels: np.ndarray            # (nz, ny, nx) int16
    spacing: tuple[float, float, float]   # (sx, sy, sz) mm
    case_id: str = ""

    def __post_init__(self):
        v = np.asarray(self.voxels)
        if v.dtype != np.int16:
            raise ValueError(f"CtVolume voxels must be int16, got {v.dtype}")
        _check_geometry(v, self.spacing)
        object.__setattr__(self, "voxels", _freeze(v))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.voxels.shape
        return (nx, ny, nz)

    @property
    def voxel_volume_mm3(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz

    def __eq__(self, other):
        if not isinstance(other, CtVolume):
            return NotImplemented
        return (
            self.spacing == other.spacing
            and self.case_id == other.case_id
            and self.voxels.shape == other.voxels.shape
            and np.array_equal(self.voxels, other.voxels)
        )


@dataclass(frozen=True, eq=False)
class SliceMeta:
    """Per-slice calibration bookkeeping kept from series ingestion."""

    index: int
    z_position_mm: float
    rescale_slope: float = 1.0
    rescale_intercept: float = 0.0

    def __post_init__(self):
        if self.rescale_slope == 0:
            raise ValueError("rescale slope must be nonzero")

    def __eq__(self, other):
        if not isinstance(other, SliceMeta):
            return NotImplemented
        return (self.index, self.z_position_mm, self.rescale_slope, self.rescale_intercept) == (
            other.index, other.z_position_mm, other.rescale_slope, other.rescale_intercept)


@dataclass(frozen=True, eq=False)
class GrayVolume:
    """Unsigned 8-bit view of a clipped HU volume, same geometry."""

    voxels: np.ndarray            # (nz, ny, nx) uint8
    spacing: tuple[float, float, float]

    def __post_init__(self):
        v = np.asarray(self.voxels)
        if v.dtype != np.uint8:
            raise ValueError(f"GrayVolume voxels must be uint8, got {v.dtype}")
        _check_geometry(v, self.spacing)
        object.__setattr__(self, "voxels", _freeze(v))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.voxels.shape
        return (nx, ny, nz)

    def __eq__(self, other):
        if not isinstance(other, GrayVolume):
            return NotImplemented
        return (
            self.spacing == other.spacing
            and self.voxels.shape == other.voxels.shape
            and np.array_equal(self.voxels, other.voxels)
        )


@dataclass(frozen=True, eq=False)
class BinaryMask3D:
    """Boolean grid aligned to the volume it annotates."""

    bits: np.ndarray              # (nz, ny, nx) bool
    spacing: tuple[float, float, float]

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.dtype != np.bool_:
            raise ValueError(f"BinaryMask3D bits must be bool, got {b.dtype}")
        _check_geometry(b, self.spacing)
        object.__setattr__(self, "bits", _freeze(b))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.bits.shape
        return (nx, ny, nz)

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other):
        if not isinstance(other, BinaryMask3D):
            return NotImplemented
        return (
            self.spacing == other.spacing
            and self.bits.shape == other.bits.shape
            and np.array_equal(self.bits, other.bits)
        )

    @classmethod
    def empty_like(cls, other) -> "BinaryMask3D":
        nz, ny, nx = _shape_of(other)
        return cls(np.zeros((nz, ny, nx), dtype=bool), other.spacing)

    @classmethod
    def full_like(cls, other) -> "BinaryMask3D":
        nz, ny, nx = _shape_of(other)
        return cls(np.ones((nz, ny, nx), dtype=bool), other.spacing)


@dataclass(frozen=True, eq=False)
class ProbabilityMap3D:
    """Per-voxel probability in [0, 1], output of segmenters."""

    values: np.ndarray            # (nz, ny, nx) float32
    spacing: tuple[float, float, float]

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.dtype != np.float32:
            raise ValueError(f"ProbabilityMap3D values must be float32, got {v.dtype}")
        _check_geometry(v, self.spacing)
        bad = ~((v >= 0.0) & (v <= 1.0))   # NaN also fails here
        if bad.any():
            zi, yi, xi = (int(i[0]) for i in np.nonzero(bad))
            from .errors import ValueOutOfRange
            raise ValueOutOfRange((xi, yi, zi), float(v[zi, yi, xi]), "[0, 1]")
        object.__setattr__(self, "values", _freeze(v))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.values.shape
        return (nx, ny, nz)

    def __eq__(self, other):
        if not isinstance(other, ProbabilityMap3D):
            return NotImplemented
        return (
            self.spacing == other.spacing
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values)
        )


def _shape_of(obj) -> tuple[int, int, int]:
    for name in ("bits", "voxels", "values"):
        arr = getattr(obj, name, None)
        if arr is not None:
            return arr.shape
    raise TypeError(f"no grid attribute on {type(obj).__name__}")


def require_same_grid(a, b) -> None:
    """Raise DimMismatch unless a and b share shape and spacing."""
    from .errors import DimMismatch
    if _shape_of(a) != _shape_of(b) or tuple(a.spacing) != tuple(b.spacing):
        raise DimMismatch((a.dims, a.spacing), (b.dims, b.spacing))
