"""HU clipping, grayscale normalization, and HU histograms.

The working window is [-1200, 600] HU. Grayscale conversion maps that window
linearly onto [0, 255] with deterministic round-half-up, so -1200 -> 0 and
600 -> 255 exactly and the mapping is monotone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfRange
from .volume import HU_MAX, HU_MIN, BinaryMask3D, CtVolume, GrayVolume, require_same_grid


def clip_hu(volume: CtVolume) -> CtVolume:
    """Clamp every voxel into [-1200, 600]; geometry unchanged. Idempotent."""
    clipped = np.clip(volume.voxels, HU_MIN, HU_MAX).astype(np.int16)
    return CtVolume(clipped, volume.spacing, volume.case_id)


def hu_to_gray(hu: float) -> int:
    """Gray value of one clipped HU value under the same mapping."""
    if not HU_MIN <= hu <= HU_MAX:
        raise OutOfRange(f"HU {hu} outside [{HU_MIN}, {HU_MAX}]")
    return int(np.floor((float(hu) - HU_MIN) * (255.0 / (HU_MAX - HU_MIN)) + 0.5))


def normalize_to_gray(volume: CtVolume) -> GrayVolume:
    """Map clipped HU linearly onto [0, 255], rounding .5 up.

    Requires the volume to be clipped already; raises OutOfRange otherwise.
    """
    v = volume.voxels
    if v.min() < HU_MIN or v.max() > HU_MAX:
        raise OutOfRange(
            f"volume has HU outside [{HU_MIN}, {HU_MAX}]; run clip_hu first")
    scaled = (v.astype(np.float64) - HU_MIN) * (255.0 / (HU_MAX - HU_MIN))
    gray = np.floor(scaled + 0.5).astype(np.uint8)   # half-up; values are >= 0
    return GrayVolume(gray, volume.spacing)


@dataclass(frozen=True)
class HuHistogram:
    """Voxel counts over HU bins tiling [-1200, 600].

    Bins are left-closed right-open except the last, which is closed, so the
    window is tiled without double counting.
    """

    bin_edges: np.ndarray   # strictly increasing, first=-1200, last=600
    counts: np.ndarray      # one count per bin

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def fraction_within(self, lo: float, hi: float) -> float:
        """Mass of bins fully inside [lo, hi], as a fraction of the total."""
        if self.total == 0:
            return 0.0
        inside = (self.bin_edges[:-1] >= lo) & (self.bin_edges[1:] <= hi)
        return float(self.counts[inside].sum()) / self.total


def histogram_edges(bin_width: float) -> np.ndarray:
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    edges = [float(HU_MIN)]
    while edges[-1] + bin_width < HU_MAX:
        edges.append(edges[-1] + bin_width)
    edges.append(float(HU_MAX))
    return np.asarray(edges, dtype=np.float64)


def hu_histogram(volume: CtVolume, mask: BinaryMask3D, bin_width: float) -> HuHistogram:
    """Histogram of HU values under ``mask``.

    Values are clamped into the window before binning, so counts always sum
    to the number of masked voxels.
    """
    require_same_grid(volume, mask)
    edges = histogram_edges(bin_width)
    values = np.clip(volume.voxels[mask.bits], HU_MIN, HU_MAX)
    counts, _ = np.histogram(values, bins=edges)
    return HuHistogram(bin_edges=edges, counts=counts.astype(np.int64))
