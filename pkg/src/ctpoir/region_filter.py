"""Region-level false-positive removal behind a pluggable scorer.

Candidate regions come from connected components of the infected mask. Each
region yields one square gray patch per slice it touches. A scorer assigns
each patch a probability of being a genuine lesion; the region score is the
mean over its patches, and regions below the operating threshold are dropped
whole. Scores can also be supplied per region from a sidecar CSV, which is
how externally trained classifiers plug in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._parallel import parallel_map
from .errors import ScorerFailure
from .io import read_region_scores
from .mask_ops import Region, connected_components, mask_from_regions, square_window
from .raster import write_pgm
from .volume import BinaryMask3D, GrayVolume, require_same_grid

BUILTIN_PATCH_SIZE = 32


@dataclass(frozen=True)
class Patch:
    """One square gray crop of a region on one slice."""

    slice_index: int
    pixels: np.ndarray          # (side, side) uint8, zero-padded outside the image
    fill_ratio: float           # region pixels on this slice / side^2
    region_voxel_count: int     # 3D size of the parent region


@dataclass
class ScoredRegion:
    region: Region
    patches: list[Patch]
    score: float | None = None


@dataclass(frozen=True)
class FilterConfig:
    threshold: float = 0.45
    min_region_voxels: int = 1

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.threshold}")
        if self.min_region_voxels < 1:
            raise ValueError("min_region_voxels must be >= 1")


def _crop_padded(image: np.ndarray, x0: int, y0: int, side: int) -> np.ndarray:
    out = np.zeros((side, side), dtype=np.uint8)
    h, w = image.shape
    sx0, sx1 = max(x0, 0), min(x0 + side, w)
    sy0, sy1 = max(y0, 0), min(y0 + side, h)
    if sx0 < sx1 and sy0 < sy1:
        out[sy0 - y0:sy1 - y0, sx0 - x0:sx1 - x0] = image[sy0:sy1, sx0:sx1]
    return out


def extract_candidates(infected_mask: BinaryMask3D, gray: GrayVolume) -> list[ScoredRegion]:
    """One unscored candidate per connected component, patches per touched slice."""
    require_same_grid(infected_mask, gray)
    candidates = []
    for region in connected_components(infected_mask):
        patches = []
        for z in region.slice_indices:
            x0, y0, side = square_window(region, z)
            pixels = _crop_padded(gray.voxels[z], x0, y0, side)
            on_slice = region.pixels_on_slice(z).shape[0]
            patches.append(Patch(
                slice_index=z,
                pixels=pixels,
                fill_ratio=on_slice / float(side * side),
                region_voxel_count=region.voxel_count,
            ))
        candidates.append(ScoredRegion(region=region, patches=patches))
    return candidates


def pad_for_builtin(pixels: np.ndarray, size: int = BUILTIN_PATCH_SIZE) -> np.ndarray:
    """Zero-pad (centered) up to ``size``; larger patches pass through."""
    side = pixels.shape[0]
    if side >= size:
        return pixels
    out = np.zeros((size, size), dtype=np.uint8)
    off = (size - side) // 2
    out[off:off + side, off:off + side] = pixels
    return out


# Logistic over (mean gray, gray spread, bbox fill ratio, log size). The
# coefficients are fixed by construction: compact solid mid-gray blobs
# (lesion-like) land above the 0.45 operating point; thin-walled tubes,
# boundary arcs, and speck noise land below it. Zero pixels (padding and
# out-of-image) are excluded from the gray statistics.
BUILTIN_COEFFS = {
    "bias": -9.2,
    "mean_gray": 1.0,
    "std_gray": -2.0,
    "fill_ratio": 7.0,
    "log_size": 6.0,     # applied to log10(voxels)/3, saturating at 1000 voxels
}


def builtin_patch_score(patch: Patch) -> float:
    pixels = pad_for_builtin(patch.pixels).astype(np.float64) / 255.0
    content = pixels[pixels > 0.0]
    mean_gray = float(content.mean()) if content.size else 0.0
    std_gray = float(content.std()) if content.size else 0.0
    c = BUILTIN_COEFFS
    z = (
        c["bias"]
        + c["mean_gray"] * mean_gray
        + c["std_gray"] * std_gray
        + c["fill_ratio"] * patch.fill_ratio
        + c["log_size"] * min(math.log10(max(patch.region_voxel_count, 1)) / 3.0, 1.0)
    )
    return 1.0 / (1.0 + math.exp(-z))


def score_regions(candidates, patch_scorer=None, region_scores=None,
                  threads: int = 1) -> list[ScoredRegion]:
    """Attach a score to every candidate.

    Either ``patch_scorer`` (callable Patch -> probability, mean-aggregated
    over the region's patches) or ``region_scores`` (mapping region id ->
    probability, read verbatim) must be given.
    """
    if (patch_scorer is None) == (region_scores is None):
        raise ValueError("provide exactly one of patch_scorer / region_scores")

    def score_one(cand: ScoredRegion) -> ScoredRegion:
        rid = cand.region.id
        if region_scores is not None:
            if rid not in region_scores:
                raise ScorerFailure(rid, "no sidecar score for region")
            value = float(region_scores[rid])
        else:
            try:
                per_patch = [float(patch_scorer(p)) for p in cand.patches]
            except ScorerFailure:
                raise
            except Exception as exc:
                raise ScorerFailure(rid, exc) from exc
            value = float(np.mean(per_patch))
        if not 0.0 <= value <= 1.0:
            raise ScorerFailure(rid, f"score {value} outside [0, 1]")
        cand.region.score = value
        return ScoredRegion(region=cand.region, patches=cand.patches, score=value)

    return parallel_map(score_one, candidates, threads)


def filter_regions(scored, config: FilterConfig, dims=None, spacing=None) -> BinaryMask3D:
    """Union of regions with score >= threshold and size >= min_region_voxels."""
    scored = list(scored)
    if dims is None or spacing is None:
        if not scored:
            raise ValueError("dims and spacing are required for an empty candidate list")
        dims, spacing = scored[0].region.dims, scored[0].region.spacing
    for s in scored:
        if s.score is None:
            raise ValueError(f"region {s.region.id} is unscored")
    keep = [s.region for s in scored
            if s.score >= config.threshold and s.region.voxel_count >= config.min_region_voxels]
    return mask_from_regions(keep, dims, spacing)


def sidecar_scores_from_file(path) -> dict[int, float]:
    return read_region_scores(path)


def export_patches(candidates, out_dir) -> list[Path]:
    """Write one PGM per (region, slice) for external classifiers."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for cand in candidates:
        for patch in cand.patches:
            path = out_dir / f"region{cand.region.id:03d}_slice{patch.slice_index:03d}.pgm"
            write_pgm(patch.pixels, path)
            written.append(path)
    return written
