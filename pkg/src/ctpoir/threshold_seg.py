"""HU-threshold segmentation, the threshold sweep, and dirty-label bootstrap.

``segment_by_threshold`` keeps voxels at or below a HU cut, removes exterior
air by deleting any component touching the x/y image border, and keeps the
two largest remaining components (the lungs). The sweep evaluates the fixed
arithmetic progression of cuts from -800 to 0 HU in steps of 50 and picks the
one with the best Dice against a reference mask; the lesion mask is then the
lung mask minus a second, lower cut inside it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._parallel import parallel_map
from .mask_ops import _STRUCT_26
from .metrics import dice
from .volume import BinaryMask3D, CtVolume, require_same_grid

SWEEP_THRESHOLDS: tuple[int, ...] = tuple(range(-800, 1, 50))

DEFAULT_LUNG_HU = -200
DEFAULT_INFECTED_HU = -750


@dataclass(frozen=True)
class SweepResult:
    entries: tuple[tuple[int, float], ...]   # (threshold_hu, dice)
    best_threshold: int
    best_mask: BinaryMask3D


def segment_by_threshold(volume: CtVolume, t: int) -> BinaryMask3D:
    """Lung candidates: {HU <= t}, minus border-touching air, top-2 components."""
    raw = volume.voxels <= t
    labels, n = ndimage.label(raw, structure=_STRUCT_26)
    if n == 0:
        return BinaryMask3D(np.zeros_like(raw), volume.spacing)

    border = np.concatenate([
        labels[:, 0, :].ravel(), labels[:, -1, :].ravel(),
        labels[:, :, 0].ravel(), labels[:, :, -1].ravel(),
    ])
    border_ids = np.unique(border[border > 0])
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    counts[0] = 0
    counts[border_ids] = 0

    keep = np.argsort(counts, kind="stable")[::-1][:2]   # stable: ties to lower label id
    keep = keep[counts[keep] > 0]
    bits = np.isin(labels, keep)
    return BinaryMask3D(bits, volume.spacing)


def _argmax_low_tie(entries) -> int:
    """Index of the max dice; ties go to the more negative threshold."""
    best = 0
    for i in range(1, len(entries)):
        if entries[i][1] > entries[best][1]:
            best = i
    return best


def sweep_lung_threshold(volume: CtVolume, gt_lung: BinaryMask3D,
                         threads: int = 1) -> SweepResult:
    require_same_grid(volume, gt_lung)
    masks = parallel_map(lambda t: segment_by_threshold(volume, t), SWEEP_THRESHOLDS, threads)
    entries = tuple((t, dice(m, gt_lung)) for t, m in zip(SWEEP_THRESHOLDS, masks))
    best = _argmax_low_tie(entries)
    return SweepResult(entries=entries, best_threshold=SWEEP_THRESHOLDS[best],
                       best_mask=masks[best])


def infected_candidate(volume: CtVolume, lung_mask: BinaryMask3D, t: int) -> BinaryMask3D:
    """Lung mask minus {HU <= t} restricted inside it: voxels denser than the cut."""
    require_same_grid(volume, lung_mask)
    bits = lung_mask.bits & ~(volume.voxels <= t)
    return BinaryMask3D(bits, volume.spacing)


def infected_by_subtraction(volume: CtVolume, lung_mask: BinaryMask3D,
                            gt_infected: BinaryMask3D, threads: int = 1) -> SweepResult:
    masks = parallel_map(lambda t: infected_candidate(volume, lung_mask, t),
                         SWEEP_THRESHOLDS, threads)
    entries = tuple((t, dice(m, gt_infected)) for t, m in zip(SWEEP_THRESHOLDS, masks))
    best = _argmax_low_tie(entries)
    return SweepResult(entries=entries, best_threshold=SWEEP_THRESHOLDS[best],
                       best_mask=masks[best])


def bootstrap_labels(volume: CtVolume,
                     t_lung: int = DEFAULT_LUNG_HU,
                     t_inf: int = DEFAULT_INFECTED_HU) -> tuple[BinaryMask3D, BinaryMask3D]:
    """First-pass label masks from fixed cuts; no ground truth needed."""
    lung = segment_by_threshold(volume, t_lung)
    infected = infected_candidate(volume, lung, t_inf)
    return lung, infected
