"""Gradient and Laplacian edge detection.

Gradients use 3x3 Sobel windows scaled by 1/8, so a ramp rising one unit per
pixel reports a gradient of exactly 1. Borders are handled by replicating the
outermost row/column; a window that touches an invalid cell yields an invalid
output cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridTooSmall, InvalidParameter
from .raster import GeoTransform, RasterGrid


@dataclass(frozen=True, eq=False)
class GradientField:
    gx: RasterGrid
    gy: RasterGrid
    magnitude: RasterGrid
    orientation: RasterGrid

    @property
    def valid(self) -> np.ndarray:
        return self.magnitude.valid


@dataclass(frozen=True, eq=False)
class EdgeMap:
    mask: np.ndarray  # uint8, 1 = edge
    valid: np.ndarray
    geo: GeoTransform | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def as_grid(self) -> RasterGrid:
        return RasterGrid.from_array(self.mask.astype(np.float64), self.valid, None, self.geo)


def _edge_map(mask: np.ndarray, valid: np.ndarray, geo) -> EdgeMap:
    mask = (mask & valid).astype(np.uint8)
    return EdgeMap(mask, np.asarray(valid, dtype=bool), geo)


def _check_size(grid: RasterGrid) -> None:
    if grid.rows < 3 or grid.cols < 3:
        raise GridTooSmall(f"edge operators need at least 3x3 cells, got {grid.rows}x{grid.cols}")


def _padded(grid: RasterGrid) -> tuple[np.ndarray, np.ndarray]:
    return np.pad(grid.filled(0.0), 1, mode="edge"), np.pad(grid.valid, 1, mode="edge")


def sobel_gradient_field(grid: RasterGrid) -> GradientField:
    _check_size(grid)
    p, pv = _padded(grid)
    gx = ((p[:-2, 2:] - p[:-2, :-2]) + 2 * (p[1:-1, 2:] - p[1:-1, :-2]) + (p[2:, 2:] - p[2:, :-2])) / 8.0
    gy = ((p[2:, :-2] - p[:-2, :-2]) + 2 * (p[2:, 1:-1] - p[:-2, 1:-1]) + (p[2:, 2:] - p[:-2, 2:])) / 8.0
    valid = np.ones(grid.shape, dtype=bool)
    for dr in range(3):
        for dc in range(3):
            valid &= pv[dr : dr + grid.rows, dc : dc + grid.cols]
    magnitude = np.hypot(gx, gy)
    orientation = np.arctan2(gy, gx)
    # keep the half-open range (-pi, pi]; arctan2(-0.0, x<0) returns -pi
    orientation[orientation == -math.pi] = math.pi
    layer = lambda arr: RasterGrid.from_array(arr, valid, grid.nodata, grid.geo)  # noqa: E731
    return GradientField(layer(gx), layer(gy), layer(magnitude), layer(orientation))


# (row, col) offsets of the two neighbors across the edge, per orientation bin
_NMS_OFFSETS = {
    0: ((0, 1), (0, -1)),
    1: ((1, 1), (-1, -1)),
    2: ((1, 0), (-1, 0)),
    3: ((1, -1), (-1, 1)),
}


def orientation_bins(orientation: np.ndarray) -> np.ndarray:
    """Quantize angles to 0, 45, 90, 135 degrees (bins 0..3), modulo 180."""
    folded = np.mod(orientation, math.pi)
    return (np.floor((folded + math.pi / 8) / (math.pi / 4)).astype(np.int64)) % 4


def nonmax_suppress(field: GradientField, threshold: float = 0.0) -> EdgeMap:
    """Keep pixels whose magnitude is a (non-strict) maximum across the edge."""
    if threshold < 0:
        raise InvalidParameter(f"threshold must be >= 0, got {threshold}")
    valid = field.valid
    mag = np.where(valid, field.magnitude.values, -np.inf)
    rows, cols = mag.shape
    padded = np.pad(mag, 1, mode="edge")
    bins = orientation_bins(field.orientation.filled(0.0))
    keep = valid & (mag >= threshold)
    for b, offsets in _NMS_OFFSETS.items():
        sel = bins == b
        for dr, dc in offsets:
            neighbor = padded[1 + dr : 1 + dr + rows, 1 + dc : 1 + dc + cols]
            keep &= ~sel | (mag >= neighbor)
    return _edge_map(keep, valid, field.magnitude.geo)


def laplacian(grid: RasterGrid) -> RasterGrid:
    """4-neighbor Laplacian with replicated borders."""
    _check_size(grid)
    p, pv = _padded(grid)
    lap = p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4 * p[1:-1, 1:-1]
    valid = pv[1:-1, 1:-1] & pv[:-2, 1:-1] & pv[2:, 1:-1] & pv[1:-1, :-2] & pv[1:-1, 2:]
    return RasterGrid.from_array(lap, valid, grid.nodata, grid.geo)


def laplacian_zero_crossings(grid: RasterGrid, min_slope: float = 0.0) -> EdgeMap:
    """Mark pixels whose Laplacian has the opposite sign of a 4-neighbor's.

    A zero Laplacian has no sign and never crosses. The jump between the two
    Laplacian values must be at least ``min_slope``.
    """
    if min_slope < 0:
        raise InvalidParameter(f"min_slope must be >= 0, got {min_slope}")
    lap_grid = laplacian(grid)
    lap = lap_grid.filled(0.0)
    valid = lap_grid.valid
    rows, cols = lap.shape
    lp = np.pad(lap, 1, mode="edge")
    vp = np.pad(valid, 1, mode="edge")
    sign = np.sign(lap)
    marked = np.zeros(lap.shape, dtype=bool)
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        nb = lp[1 + dr : 1 + dr + rows, 1 + dc : 1 + dc + cols]
        nb_ok = vp[1 + dr : 1 + dr + rows, 1 + dc : 1 + dc + cols]
        marked |= nb_ok & (sign * np.sign(nb) < 0) & (np.abs(lap - nb) >= min_slope)
    return _edge_map(marked, valid, grid.geo)


def _dilate_axis(mask: np.ndarray, radius: int, axis: int) -> np.ndarray:
    out = mask.copy()
    n = mask.shape[axis]
    for shift in range(1, min(radius, n - 1) + 1):
        lead = [slice(None)] * 2
        trail = [slice(None)] * 2
        lead[axis] = slice(shift, None)
        trail[axis] = slice(None, -shift)
        out[tuple(lead)] |= mask[tuple(trail)]
        out[tuple(trail)] |= mask[tuple(lead)]
    return out


def link_edges(edges: EdgeMap, dilate_radius: int = 1) -> EdgeMap:
    """Close gaps by dilating with a (2r+1)x(2r+1) square; r=0 is the identity."""
    if dilate_radius < 0:
        raise InvalidParameter(f"dilate_radius must be >= 0, got {dilate_radius}")
    mask = edges.mask.astype(bool)
    if dilate_radius:
        mask = _dilate_axis(_dilate_axis(mask, dilate_radius, 0), dilate_radius, 1)
    return _edge_map(mask, edges.valid, edges.geo)
