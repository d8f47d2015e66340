"""Evaluation metrics: Dice, infected proportion, Pearson r, mAPE, ROC/AUC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyList,
    EmptyLung,
    SingleClass,
    ZeroGroundTruth,
    ZeroVariance,
)
from .mask_ops import volume_mm3
from .volume import BinaryMask3D, require_same_grid


def dice(a: BinaryMask3D, b: BinaryMask3D) -> float:
    """2|A∩B| / (|A|+|B|); two empty masks agree perfectly (1.0)."""
    require_same_grid(a, b)
    na, nb = a.count, b.count
    if na + nb == 0:
        return 1.0
    overlap = int((a.bits & b.bits).sum())
    return 2.0 * overlap / (na + nb)


def mean_dice(cases) -> float:
    """Unweighted mean of per-case Dice over (pred, gt) pairs."""
    cases = list(cases)
    if not cases:
        raise EmptyList("mean Dice over zero cases")
    return float(np.mean([dice(pred, gt) for pred, gt in cases]))


def poir(infected: BinaryMask3D, lung: BinaryMask3D) -> float:
    """Infected volume over intact-lung volume, as a fraction."""
    require_same_grid(infected, lung)
    lung_vol = volume_mm3(lung)
    if lung_vol == 0.0:
        raise EmptyLung("lung mask has zero volume")
    return volume_mm3(infected) / lung_vol


@dataclass(frozen=True)
class PairedSeries:
    """Aligned observation pairs (x_i, y_i)."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        ys = np.asarray(self.ys, dtype=np.float64)
        if xs.ndim != 1 or xs.shape != ys.shape:
            raise ValueError(f"series must be equal-length 1D, got {xs.shape} vs {ys.shape}")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self) -> int:
        return int(self.xs.size)

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.xs.tolist(), self.ys.tolist()))


def pearson(series: PairedSeries) -> float:
    """r = (NΣxy - ΣxΣy) / (sqrt(NΣx² - (Σx)²) · sqrt(NΣy² - (Σy)²))."""
    if series.n < 2:
        raise ValueError(f"Pearson needs n >= 2, got {series.n}")
    x, y = series.xs, series.ys
    n = float(series.n)
    sx, sy = x.sum(), y.sum()
    sxx, syy, sxy = (x * x).sum(), (y * y).sum(), (x * y).sum()
    dx = n * sxx - sx * sx
    dy = n * syy - sy * sy
    if dx <= 0.0 or dy <= 0.0:
        raise ZeroVariance("a constant series has no correlation")
    return float((n * sxy - sx * sy) / (np.sqrt(dx) * np.sqrt(dy)))


def mape(series: PairedSeries) -> float:
    """Mean |pred - gt| / |gt|, in percent. xs are predictions, ys ground truth."""
    if series.n < 1:
        raise ValueError("mAPE needs at least one pair")
    zero = np.nonzero(series.ys == 0.0)[0]
    if zero.size:
        raise ZeroGroundTruth(int(zero[0]))
    rel = np.abs(series.xs - series.ys) / np.abs(series.ys)
    return float(rel.mean() * 100.0)


@dataclass(frozen=True)
class RocCurve:
    """Operating points sorted by descending score threshold, plus the area."""

    points: tuple[tuple[float, float], ...]   # (fpr, tpr), (0,0) .. (1,1)
    auc: float


def roc_auc(scores, labels) -> RocCurve:
    """Threshold sweep over distinct scores; trapezoid AUC (ties count 0.5)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1D")
    n_pos = int(labels.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs both classes present")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    # one operating point after each block of tied scores
    boundary = np.nonzero(np.diff(sorted_scores))[0]
    cut = np.concatenate([boundary, [scores.size - 1]])
    tp = np.cumsum(sorted_labels)[cut]
    fp = np.cumsum(~sorted_labels)[cut]
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])

    area = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) * 0.5))
    points = tuple((float(f), float(t)) for f, t in zip(fpr, tpr))
    return RocCurve(points=points, auc=area)
