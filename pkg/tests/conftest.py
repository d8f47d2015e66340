"""Shared fixtures and independent oracle implementations.

The oracles here deliberately avoid the library's own code paths: flood fill
instead of scipy labeling, per-voxel set enumeration instead of vectorized
mask algebra, rank statistics instead of curve integration. Tests compare the
fast implementations against these slow, obviously-correct ones.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from ctpoir import BinaryMask3D, Blob, CtVolume, PhantomSpec, make_phantom


# --- small deterministic inputs ---------------------------------------------

@pytest.fixture(scope="session")
def small_phantom():
    spec = PhantomSpec(
        dims=(12, 10, 5), spacing=(0.7, 0.8, 5.0), seed=3, case_id="small",
        lungs=(Blob((4.0, 4.5, 2.0), (2.0, 2.5, 1.5), -650, 50),
               Blob((8.0, 4.5, 2.0), (2.0, 2.5, 1.5), -650, 50)),
        body_semiaxes=(5.4, 4.4),
    )
    return make_phantom(spec)


@pytest.fixture(scope="session")
def default_phantom():
    return make_phantom(PhantomSpec.default())


@pytest.fixture(scope="session")
def separated_phantom():
    return make_phantom(PhantomSpec.separated())


def random_mask(rng, max_dims=(16, 16, 8), spacing=(1.0, 1.0, 1.0)) -> BinaryMask3D:
    nx = int(rng.integers(1, max_dims[0] + 1))
    ny = int(rng.integers(1, max_dims[1] + 1))
    nz = int(rng.integers(1, max_dims[2] + 1))
    density = float(rng.uniform(0.05, 0.75))
    bits = rng.random((nz, ny, nx)) < density
    return BinaryMask3D(bits, spacing)


def mask_from_voxels(voxels, dims, spacing=(1.0, 1.0, 1.0)) -> BinaryMask3D:
    nx, ny, nz = dims
    bits = np.zeros((nz, ny, nx), dtype=bool)
    for x, y, z in voxels:
        bits[z, y, x] = True
    return BinaryMask3D(bits, spacing)


# --- oracles -----------------------------------------------------------------

def voxel_set(mask: BinaryMask3D) -> set:
    zs, ys, xs = np.nonzero(mask.bits)
    return {(int(x), int(y), int(z)) for x, y, z in zip(xs, ys, zs)}


def dice_oracle(a: BinaryMask3D, b: BinaryMask3D) -> float:
    sa, sb = voxel_set(a), voxel_set(b)
    if not sa and not sb:
        return 1.0
    return 2.0 * len(sa & sb) / (len(sa) + len(sb))


_OFFSETS_26 = [(dx, dy, dz)
               for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
               if (dx, dy, dz) != (0, 0, 0)]


def flood_fill_components(mask: BinaryMask3D) -> list[set]:
    """Brute-force 26-connected components, ordered by first voxel in scan order."""
    nz, ny, nx = mask.bits.shape
    remaining = voxel_set(mask)
    scan_ordered = sorted(remaining, key=lambda v: (v[2], v[1], v[0]))
    components = []
    seen = set()
    for start in scan_ordered:
        if start in seen:
            continue
        component = set()
        stack = [start]
        seen.add(start)
        while stack:
            x, y, z = stack.pop()
            component.add((x, y, z))
            for dx, dy, dz in _OFFSETS_26:
                n = (x + dx, y + dy, z + dz)
                if n not in seen and n in remaining:
                    seen.add(n)
                    stack.append(n)
        components.append(component)
    return components


def pearson_oracle(xs, ys) -> float:
    n = len(xs)
    sx = math.fsum(xs)
    sy = math.fsum(ys)
    sxx = math.fsum(x * x for x in xs)
    syy = math.fsum(y * y for y in ys)
    sxy = math.fsum(x * y for x, y in zip(xs, ys))
    num = n * sxy - sx * sy
    den = math.sqrt(n * sxx - sx * sx) * math.sqrt(n * syy - sy * sy)
    return num / den


def mape_oracle(preds, gts) -> float:
    return 100.0 * math.fsum(abs(p - g) / abs(g) for p, g in zip(preds, gts)) / len(preds)


def mann_whitney_auc_oracle(scores, labels) -> float:
    """AUC as the normalized rank-sum statistic, ties get average rank."""
    n = len(scores)
    order = sorted(range(n), key=lambda i: scores[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        avg_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg_rank
        i = j + 1
    pos = [i for i in range(n) if labels[i]]
    n_pos, n_neg = len(pos), n - len(pos)
    rank_sum = math.fsum(ranks[i] for i in pos)
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def normalize_oracle(hu: int) -> int:
    """Exact rational round-half-up of the gray mapping."""
    value = Fraction(hu + 1200, 1800) * 255
    return math.floor(value + Fraction(1, 2))


def contour_oracle(bits2d: np.ndarray) -> set:
    h, w = bits2d.shape
    result = set()
    for yy in range(h):
        for xx in range(w):
            if not bits2d[yy, xx]:
                continue
            for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                ny, nx2 = yy + dy, xx + dx
                if not (0 <= ny < h and 0 <= nx2 < w) or not bits2d[ny, nx2]:
                    result.add((xx, yy))
                    break
    return result
