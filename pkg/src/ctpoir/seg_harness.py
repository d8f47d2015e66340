"""2.5D inference harness: slice stacking, overlap averaging, binarization.

A segmenter is any callable taking a 3-slice SliceStack and returning a
(3, ny, nx) float array of per-pixel probabilities, one map per stacked
slice. The harness runs one stack per center slice (stride 1, edge slices
replicated), then averages every prediction targeting a given slice.
Replicated-slot predictions at the volume boundary are included in the
average, so the divisor is always 3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._parallel import parallel_map
from .errors import SegmenterFailure
from .io import load_probmaps  # re-exported: external probability maps plug in here
from .preprocess import hu_to_gray
from .volume import BinaryMask3D, GrayVolume, ProbabilityMap3D

__all__ = [
    "SliceStack", "stack_slices", "run_25d", "binarize",
    "load_probmaps", "threshold_probability_segmenter", "coverage_counts",
]


@dataclass(frozen=True)
class SliceStack:
    """Three neighboring gray slices around one center slice."""

    center_index: int
    slice_indices: tuple[int, int, int]    # clamped to [0, nz-1]
    pixels: np.ndarray                     # (3, ny, nx) uint8


def stack_slices(volume: GrayVolume) -> list[SliceStack]:
    """One stack per center index, stride 1, edges replicated."""
    nz = volume.voxels.shape[0]
    stacks = []
    for z in range(nz):
        idx = (max(z - 1, 0), z, min(z + 1, nz - 1))
        stacks.append(SliceStack(
            center_index=z,
            slice_indices=idx,
            pixels=volume.voxels[list(idx)],
        ))
    return stacks


def coverage_counts(nz: int) -> list[int]:
    """How many (stack, slot) predictions target each slice."""
    counts = [0] * nz
    for z in range(nz):
        for zi in (max(z - 1, 0), z, min(z + 1, nz - 1)):
            counts[zi] += 1
    return counts


def run_25d(volume: GrayVolume, segmenter, threads: int = 1) -> ProbabilityMap3D:
    """Run a per-stack segmenter over the volume and average overlaps.

    Accumulation happens in ascending stack order regardless of thread count,
    so output bits do not depend on the schedule.
    """
    nz, ny, nx = volume.voxels.shape
    stacks = stack_slices(volume)

    def run_one(stack: SliceStack) -> np.ndarray:
        try:
            pred = np.asarray(segmenter(stack), dtype=np.float64)
        except Exception as exc:
            raise SegmenterFailure(stack.center_index, exc) from exc
        if pred.shape != (3, ny, nx):
            raise SegmenterFailure(
                stack.center_index, f"prediction shape {pred.shape}, expected {(3, ny, nx)}")
        if not np.all((pred >= 0.0) & (pred <= 1.0)):
            raise SegmenterFailure(stack.center_index, "prediction outside [0, 1]")
        return pred

    predictions = parallel_map(run_one, stacks, threads)

    acc = np.zeros((nz, ny, nx), dtype=np.float64)
    for stack, pred in zip(stacks, predictions):
        for slot, zi in enumerate(stack.slice_indices):
            acc[zi] += pred[slot]
    return ProbabilityMap3D((acc / 3.0).astype(np.float32), volume.spacing)


def binarize(pmap: ProbabilityMap3D, tau: float = 0.5) -> BinaryMask3D:
    """Mask of voxels with probability >= tau."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    return BinaryMask3D(pmap.values >= tau, pmap.spacing)


def threshold_probability_segmenter(t_hu: int):
    """HU-threshold segmentation lifted to the segmenter contract (testing aid).

    Emits probability 1 where the gray value is at or below the gray image of
    the HU cut, 0 elsewhere; independent of stack position by construction.
    """
    g = hu_to_gray(t_hu)

    def segment(stack: SliceStack) -> np.ndarray:
        return (stack.pixels <= g).astype(np.float64)

    return segment
