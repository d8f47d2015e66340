"""Binary mask algebra, physical volumes, connected components, bounding boxes.

Components use 26-connectivity in 3D (voxels sharing a face, edge, or corner
belong together); per-slice bounding squares treat the slice as an 8-connected
2D image. Region ids are assigned in first-voxel scan order (z, then y, then
x) and are stable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import EmptyIntersection
from .volume import BinaryMask3D, require_same_grid

_STRUCT_26 = np.ones((3, 3, 3), dtype=bool)


def union(a: BinaryMask3D, b: BinaryMask3D) -> BinaryMask3D:
    require_same_grid(a, b)
    return BinaryMask3D(a.bits | b.bits, a.spacing)


def intersect(a: BinaryMask3D, b: BinaryMask3D) -> BinaryMask3D:
    require_same_grid(a, b)
    return BinaryMask3D(a.bits & b.bits, a.spacing)


def subtract(a: BinaryMask3D, b: BinaryMask3D) -> BinaryMask3D:
    """Voxels of ``a`` not in ``b`` (a AND NOT b)."""
    require_same_grid(a, b)
    return BinaryMask3D(a.bits & ~b.bits, a.spacing)


def volume_mm3(mask: BinaryMask3D) -> float:
    sx, sy, sz = mask.spacing
    return float(mask.count) * sx * sy * sz


@dataclass(eq=False)
class Region:
    """One 26-connected component of a mask.

    ``coords`` holds (x, y, z) voxel coordinates in scan order. ``score`` is
    set by the region classifier stage; it stays None until then.
    """

    id: int
    coords: np.ndarray                    # (n, 3) int columns x, y, z
    dims: tuple[int, int, int]            # of the parent mask
    spacing: tuple[float, float, float]
    score: float | None = None
    _bbox_cache: dict = field(default_factory=dict, repr=False)

    @property
    def voxel_ids(self) -> set[tuple[int, int, int]]:
        return {tuple(int(c) for c in row) for row in self.coords}

    @property
    def voxel_count(self) -> int:
        return int(self.coords.shape[0])

    @property
    def slice_extent(self) -> tuple[int, int]:
        zs = self.coords[:, 2]
        return int(zs.min()), int(zs.max())

    @property
    def slice_indices(self) -> list[int]:
        return sorted(int(z) for z in np.unique(self.coords[:, 2]))

    @property
    def bbox_square(self) -> dict[int, tuple[float, float, int]]:
        return {z: min_square_bbox(self, z) for z in self.slice_indices}

    def pixels_on_slice(self, z: int) -> np.ndarray:
        sel = self.coords[:, 2] == z
        return self.coords[sel, :2]

    def to_mask(self) -> BinaryMask3D:
        nx, ny, nz = self.dims
        bits = np.zeros((nz, ny, nx), dtype=bool)
        bits[self.coords[:, 2], self.coords[:, 1], self.coords[:, 0]] = True
        return BinaryMask3D(bits, self.spacing)


def connected_components(mask: BinaryMask3D) -> list[Region]:
    """Partition true voxels into maximal 26-connected components.

    Ids run 0..k-1 in order of each component's first voxel in scan order.
    """
    labels, n = ndimage.label(mask.bits, structure=_STRUCT_26)
    if n == 0:
        return []
    flat = labels.ravel()
    occupied = np.nonzero(flat)[0]
    # scipy assigns labels in raster order already, but the id contract is
    # load-bearing for sidecar score files, so enforce it explicitly.
    first = np.full(n + 1, flat.size, dtype=np.int64)
    np.minimum.at(first, flat[occupied], occupied)
    order = np.argsort(first[1:], kind="stable")   # old label -> rank
    rank_of = np.empty(n + 1, dtype=np.int64)
    rank_of[1:][order] = np.arange(n)

    zs, ys, xs = np.nonzero(mask.bits)             # scan order (z, y, x)
    ranks = rank_of[labels[zs, ys, xs]]
    coords = np.column_stack([xs, ys, zs]).astype(np.int64)
    regions = []
    for rid in range(n):
        sel = ranks == rid
        regions.append(Region(
            id=rid,
            coords=coords[sel],
            dims=mask.dims,
            spacing=mask.spacing,
        ))
    return regions


def mask_from_regions(regions, dims, spacing) -> BinaryMask3D:
    nx, ny, nz = dims
    bits = np.zeros((nz, ny, nx), dtype=bool)
    for region in regions:
        bits[region.coords[:, 2], region.coords[:, 1], region.coords[:, 0]] = True
    return BinaryMask3D(bits, spacing)


def min_square_bbox(region: Region, slice_index: int) -> tuple[float, float, int]:
    """Minimum circumscribed square of a region's pixels on one slice.

    Side is max(width, height) of the tight rectangle; the square is centered
    on the rectangle (biased half a pixel toward the origin when parities
    differ) and shifted, never shrunk, to stay within image bounds. Returns
    (cx, cy, side) with cx/cy the square center in pixel coordinates.
    """
    cached = region._bbox_cache.get(slice_index)
    if cached is not None:
        return cached
    pixels = region.pixels_on_slice(slice_index)
    if pixels.shape[0] == 0:
        raise EmptyIntersection(f"region {region.id} has no pixels on slice {slice_index}")
    x0, y0 = (int(v) for v in pixels.min(axis=0))
    x1, y1 = (int(v) for v in pixels.max(axis=0))
    side = max(x1 - x0 + 1, y1 - y0 + 1)
    nx, ny, _ = region.dims
    xs = _place(x0, x1, side, nx)
    ys = _place(y0, y1, side, ny)
    result = (xs + (side - 1) / 2.0, ys + (side - 1) / 2.0, side)
    region._bbox_cache[slice_index] = result
    return result


def square_window(region: Region, slice_index: int) -> tuple[int, int, int]:
    """(x_start, y_start, side) pixel window of the bounding square."""
    cx, cy, side = min_square_bbox(region, slice_index)
    return int(round(cx - (side - 1) / 2.0)), int(round(cy - (side - 1) / 2.0)), side


def _place(lo: int, hi: int, side: int, limit: int) -> int:
    start = (lo + hi - side + 1) // 2
    if side >= limit:
        return 0
    return min(max(start, 0), limit - side)
