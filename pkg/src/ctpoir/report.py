"""End-to-end case analysis, report emission, contour overlays, benchmarks.

Pipeline order: clip HU -> grayscale -> lung mask -> infected mask ->
optional region filter -> intersect infected into lung -> volumes and the
infected proportion. Every stage records its parameters into the report so a
result can be traced back to its configuration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io, threshold_seg
from .errors import PipelineError
from .mask_ops import intersect, volume_mm3
from .metrics import PairedSeries, dice, mape, mean_dice, pearson, poir
from .preprocess import clip_hu, normalize_to_gray
from .raster import write_ppm
from .region_filter import (
    FilterConfig,
    builtin_patch_score,
    extract_candidates,
    filter_regions,
    score_regions,
)
from .seg_harness import binarize, load_probmaps
from .volume import BinaryMask3D, CtVolume, require_same_grid

REPORT_SCHEMA_VERSION = 1

LUNG_CONTOUR_RGB = (0, 0, 255)
INFECTED_CONTOUR_RGB = (255, 0, 0)


class StageError(PipelineError):
    """A stage failed; carries the stage name alongside the original error."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


@dataclass(frozen=True)
class MaskSource:
    """Where a mask comes from: a builtin threshold, a probability map, or a file."""

    kind: str                   # "threshold" | "probmap" | "mask"
    threshold: int | None = None
    path: str | None = None
    tau: float = 0.5

    @classmethod
    def from_json(cls, obj: dict) -> "MaskSource":
        kind = obj["source"]
        if kind == "threshold":
            return cls(kind="threshold", threshold=int(obj["t"]))
        if kind == "probmap":
            return cls(kind="probmap", path=str(obj["path"]), tau=float(obj.get("tau", 0.5)))
        if kind == "mask":
            return cls(kind="mask", path=str(obj["path"]))
        raise ValueError(f"unknown mask source {kind!r}")

    def describe(self) -> dict:
        if self.kind == "threshold":
            return {"source": "threshold", "t": self.threshold}
        if self.kind == "probmap":
            return {"source": "probmap", "path": self.path, "tau": self.tau}
        return {"source": "mask", "path": self.path}


@dataclass(frozen=True)
class AnalyzeConfig:
    lung: MaskSource = MaskSource(kind="threshold", threshold=threshold_seg.DEFAULT_LUNG_HU)
    infected: MaskSource = MaskSource(kind="threshold",
                                      threshold=threshold_seg.DEFAULT_INFECTED_HU)
    filter_mode: str = "none"          # "none" | "builtin" | "scores"
    scores_path: str | None = None
    filter_config: FilterConfig = field(default_factory=FilterConfig)
    threads: int = 1

    @classmethod
    def from_json(cls, obj: dict) -> "AnalyzeConfig":
        kwargs = {}
        if "lung" in obj:
            kwargs["lung"] = MaskSource.from_json(obj["lung"])
        if "infected" in obj:
            kwargs["infected"] = MaskSource.from_json(obj["infected"])
        filt = obj.get("filter", {})
        if filt:
            kwargs["filter_mode"] = filt.get("mode", "none")
            kwargs["scores_path"] = filt.get("path")
            kwargs["filter_config"] = FilterConfig(
                threshold=float(filt.get("threshold", 0.45)),
                min_region_voxels=int(filt.get("min_region_voxels", 1)),
            )
        if "threads" in obj:
            kwargs["threads"] = int(obj["threads"])
        return cls(**kwargs)


@dataclass(frozen=True)
class CaseReport:
    case_id: str
    lung_volume_mm3: float
    infected_volume_mm3: float
    poir_fraction: float
    per_slice: tuple[tuple[int, float, float], ...]   # (index, lung mm², infected mm²)
    pipeline: dict
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_json(self) -> str:
        obj = {
            "schema_version": self.schema_version,
            "case_id": self.case_id,
            "lung_volume_mm3": self.lung_volume_mm3,
            "infected_volume_mm3": self.infected_volume_mm3,
            "poir_fraction": self.poir_fraction,
            "per_slice": [
                {"slice": z, "lung_area_mm2": la, "infected_area_mm2": ia}
                for z, la, ia in self.per_slice
            ],
            "pipeline": self.pipeline,
        }
        return json.dumps(obj, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CaseReport":
        obj = json.loads(text)
        return cls(
            case_id=obj["case_id"],
            lung_volume_mm3=obj["lung_volume_mm3"],
            infected_volume_mm3=obj["infected_volume_mm3"],
            poir_fraction=obj["poir_fraction"],
            per_slice=tuple(
                (int(r["slice"]), float(r["lung_area_mm2"]), float(r["infected_area_mm2"]))
                for r in obj["per_slice"]
            ),
            pipeline=obj["pipeline"],
            schema_version=int(obj["schema_version"]),
        )


def _stage(name: str, fn):
    try:
        return fn()
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _resolve_lung(volume: CtVolume, source: MaskSource) -> BinaryMask3D:
    if source.kind == "threshold":
        return threshold_seg.segment_by_threshold(volume, source.threshold)
    if source.kind == "mask":
        mask = io.read_mask(source.path)
        require_same_grid(volume, mask)
        return mask
    raise ValueError(f"lung mask cannot come from {source.kind!r}")


def _resolve_infected(volume: CtVolume, lung: BinaryMask3D, source: MaskSource) -> BinaryMask3D:
    if source.kind == "threshold":
        return threshold_seg.infected_candidate(volume, lung, source.threshold)
    if source.kind == "probmap":
        pmap = load_probmaps(source.path)
        require_same_grid(volume, pmap)
        return binarize(pmap, source.tau)
    mask = io.read_mask(source.path)
    require_same_grid(volume, mask)
    return mask


def _run_filter(infected: BinaryMask3D, gray, config: AnalyzeConfig) -> BinaryMask3D:
    candidates = extract_candidates(infected, gray)
    if config.filter_mode == "builtin":
        scored = score_regions(candidates, patch_scorer=builtin_patch_score,
                               threads=config.threads)
    elif config.filter_mode == "scores":
        scored = score_regions(candidates,
                               region_scores=io.read_region_scores(config.scores_path),
                               threads=config.threads)
    else:
        raise ValueError(f"unknown filter mode {config.filter_mode!r}")
    return filter_regions(scored, config.filter_config,
                          dims=infected.dims, spacing=infected.spacing)


def analyze_to_masks(volume: CtVolume, config: AnalyzeConfig) -> tuple[BinaryMask3D, BinaryMask3D]:
    """The final (lung, infected) masks a report is computed from."""
    clipped = _stage("preprocess", lambda: clip_hu(volume))
    gray = _stage("preprocess", lambda: normalize_to_gray(clipped))
    lung = _stage("segment-lung", lambda: _resolve_lung(clipped, config.lung))
    infected = _stage("segment-infected",
                      lambda: _resolve_infected(clipped, lung, config.infected))
    if config.filter_mode != "none":
        infected = _stage("filter", lambda: _run_filter(infected, gray, config))
    # keep the ratio well-formed even if the infected source leaks outside the lung
    infected = _stage("combine", lambda: intersect(infected, lung))
    return lung, infected


def analyze_case(volume: CtVolume, config: AnalyzeConfig) -> CaseReport:
    lung, infected = analyze_to_masks(volume, config)
    ratio = _stage("proportion", lambda: poir(infected, lung))
    scorer_provenance = "none"
    if config.filter_mode == "builtin":
        scorer_provenance = "builtin"
    elif config.filter_mode == "scores":
        scorer_provenance = f"scores:{config.scores_path}"

    sx, sy, _ = volume.spacing
    lung_areas = lung.bits.sum(axis=(1, 2)) * (sx * sy)
    inf_areas = infected.bits.sum(axis=(1, 2)) * (sx * sy)
    per_slice = tuple(
        (z, float(lung_areas[z]), float(inf_areas[z]))
        for z in range(volume.voxels.shape[0])
    )

    pipeline = {
        "lung": config.lung.describe(),
        "infected": config.infected.describe(),
        "filter": {
            "mode": config.filter_mode,
            "threshold": config.filter_config.threshold,
            "min_region_voxels": config.filter_config.min_region_voxels,
            "scorer": scorer_provenance,
        },
        "threads": config.threads,
    }
    return CaseReport(
        case_id=volume.case_id,
        lung_volume_mm3=volume_mm3(lung),
        infected_volume_mm3=volume_mm3(infected),
        poir_fraction=ratio,
        per_slice=per_slice,
        pipeline=pipeline,
    )


def contour_pixels(bits2d: np.ndarray) -> np.ndarray:
    """Mask pixels with at least one false 4-neighbor (outside the image counts as false)."""
    h, w = bits2d.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = bits2d
    surrounded = (padded[:-2, 1:-1] & padded[2:, 1:-1]
                  & padded[1:-1, :-2] & padded[1:-1, 2:])
    return bits2d & ~surrounded


def emit_overlays(volume: CtVolume, lung_mask: BinaryMask3D,
                  infected_mask: BinaryMask3D, out_dir) -> list[Path]:
    """One PPM per slice: gray base, lung contour in blue, infected in red."""
    require_same_grid(volume, lung_mask)
    require_same_grid(volume, infected_mask)
    gray = normalize_to_gray(clip_hu(volume))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for z in range(volume.voxels.shape[0]):
        rgb = np.repeat(gray.voxels[z][:, :, None], 3, axis=2)
        lung_edge = contour_pixels(lung_mask.bits[z])
        inf_edge = contour_pixels(infected_mask.bits[z])
        rgb[lung_edge] = LUNG_CONTOUR_RGB
        rgb[inf_edge] = INFECTED_CONTOUR_RGB      # infected drawn on top
        path = out_dir / f"slice_{z:04d}.ppm"
        write_ppm(np.ascontiguousarray(rgb), path)
        written.append(path)
    return written


# --- benchmark evaluation ----------------------------------------------------

@dataclass(frozen=True)
class CaseMasks:
    case_id: str
    lung_pred: BinaryMask3D
    infected_pred: BinaryMask3D
    lung_gt: BinaryMask3D
    infected_gt: BinaryMask3D


@dataclass(frozen=True)
class MetricsSummary:
    rows: tuple[tuple[str, str, float], ...]   # (method, structure, m_dice)
    pearson_r: float
    mape_percent: float

    def to_json(self) -> str:
        obj = {
            "rows": [
                {"method": m, "structure": s, "m_dice": d} for m, s, d in self.rows
            ],
            "pearson_r": self.pearson_r,
            "mape_percent": self.mape_percent,
        }
        return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def evaluate_benchmark(cases_by_method: dict[str, list[CaseMasks]],
                       primary_method: str | None = None) -> MetricsSummary:
    """Per-method mean Dice rows plus correlation/error of infected proportions.

    The proportion statistics are computed for ``primary_method`` (default:
    first method name in sorted order).
    """
    if not cases_by_method or any(not v for v in cases_by_method.values()):
        raise ValueError("every method needs at least one case")
    methods = sorted(cases_by_method)
    if primary_method is None:
        primary_method = methods[0]

    rows = []
    for method in methods:
        cases = sorted(cases_by_method[method], key=lambda c: c.case_id)
        rows.append((method, "intact lung",
                     mean_dice((c.lung_pred, c.lung_gt) for c in cases)))
        rows.append((method, "infected region",
                     mean_dice((c.infected_pred, c.infected_gt) for c in cases)))

    primary = sorted(cases_by_method[primary_method], key=lambda c: c.case_id)
    pred = [poir(c.infected_pred, c.lung_pred) for c in primary]
    truth = [poir(c.infected_gt, c.lung_gt) for c in primary]
    series = PairedSeries(np.asarray(pred), np.asarray(truth))
    return MetricsSummary(rows=tuple(rows), pearson_r=pearson(series),
                          mape_percent=mape(series))
