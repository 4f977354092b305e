"""Threshold, region-growing and edge-based segmentation (4-connectivity throughout)."""

from __future__ import annotations

import csv
import os
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .edges import EdgeMap, link_edges, nonmax_suppress, sobel_gradient_field
from .errors import (
    InvalidParameter,
    MalformedCsv,
    SeedOnNodata,
    SeedOutOfBounds,
    UnsortedCuts,
)
from .raster import GeoTransform, RasterGrid

_FOUR = ((-1, 0), (0, -1), (0, 1), (1, 0))


@dataclass(frozen=True, eq=False)
class SegmentMap:
    labels: np.ndarray  # int64, 0 = unlabeled / nodata
    segment_count: int
    geo: GeoTransform | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def as_grid(self) -> RasterGrid:
        # label 0 is a legitimate value in the written grid, not nodata
        return RasterGrid(self.labels.astype(np.float64), None, self.geo)


def _compact(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Renumber nonzero labels to 1..k preserving their order."""
    present = np.unique(labels[labels > 0])
    lut = np.zeros(int(labels.max(initial=0)) + 1, dtype=np.int64)
    lut[present] = np.arange(1, len(present) + 1)
    return lut[labels], len(present)


def threshold_segment(grid: RasterGrid, cuts: Sequence[float] = ()) -> SegmentMap:
    cuts = np.asarray(list(cuts), dtype=np.float64)
    if cuts.size > 1 and not np.all(np.diff(cuts) > 0):
        raise UnsortedCuts(f"cuts must be strictly ascending, got {cuts.tolist()}")
    # count of cuts strictly below each value
    labels = np.searchsorted(cuts, grid.values, side="left").astype(np.int64) + 1
    labels[~grid.valid] = 0
    labels, count = _compact(labels)
    return SegmentMap(labels, count, grid.geo)


def label_components(mask) -> SegmentMap:
    """4-connected components of the 1-pixels, numbered in row-major first-encounter order."""
    geo = None
    if isinstance(mask, EdgeMap):
        geo = mask.geo
        arr = mask.mask.astype(bool)
    elif isinstance(mask, RasterGrid):
        geo = mask.geo
        arr = (mask.filled(0.0) != 0)
    else:
        arr = np.asarray(mask).astype(bool)
    labels, count = ndimage.label(arr, structure=ndimage.generate_binary_structure(2, 1))
    labels = labels.astype(np.int64)
    if count:
        ids, first = np.unique(labels.ravel(), return_index=True)
        nonzero = ids > 0
        ids, first = ids[nonzero], first[nonzero]
        lut = np.zeros(count + 1, dtype=np.int64)
        lut[ids[np.argsort(first)]] = np.arange(1, count + 1)
        labels = lut[labels]
    return SegmentMap(labels, int(count), geo)


def region_grow(grid: RasterGrid, seeds: Sequence[tuple[int, int]], tolerance: float) -> SegmentMap:
    """Breadth-first growth from each (col, row) seed against the region's running mean.

    All seed pixels are claimed before growth starts, so every region keeps its
    seed; pixels reachable from several seeds go to the earliest seed.
    """
    if tolerance < 0:
        raise InvalidParameter(f"tolerance must be >= 0, got {tolerance}")
    rows, cols = grid.shape
    values = grid.values
    valid = grid.valid
    labels = np.zeros((rows, cols), dtype=np.int64)
    seen = set()
    for label, (c, r) in enumerate(seeds, start=1):
        if not (0 <= r < rows and 0 <= c < cols):
            raise SeedOutOfBounds(f"seed {label} at (col={c}, row={r}) is outside {cols}x{rows} grid")
        if not valid[r, c]:
            raise SeedOnNodata(f"seed {label} at (col={c}, row={r}) is on a nodata cell")
        if (r, c) in seen:
            raise InvalidParameter(f"seed {label} at (col={c}, row={r}) repeats an earlier seed")
        seen.add((r, c))
        labels[r, c] = label

    for label, (c, r) in enumerate(seeds, start=1):
        total = float(values[r, c])
        n = 1
        queue = deque([(r, c)])
        while queue:
            pr, pc = queue.popleft()
            for dr, dc in _FOUR:
                qr, qc = pr + dr, pc + dc
                if not (0 <= qr < rows and 0 <= qc < cols):
                    continue
                if labels[qr, qc] or not valid[qr, qc]:
                    continue
                v = float(values[qr, qc])
                if abs(v - total / n) <= tolerance:
                    labels[qr, qc] = label
                    total += v
                    n += 1
                    queue.append((qr, qc))
    return SegmentMap(labels, len(seeds), grid.geo)


def read_seeds(path: str | os.PathLike) -> list[tuple[int, int]]:
    """CSV rows ``col,row``; blank lines and ``#`` comments ignored."""
    seeds = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = next(csv.reader([line]))
            try:
                c, r = (int(x) for x in fields)
            except ValueError:
                raise MalformedCsv(f"{path}:{lineno}: expected 'col,row' integers, got {line!r}") from None
            seeds.append((c, r))
    return seeds


def edge_based_segment(grid: RasterGrid, nms_threshold: float, dilate_radius: int = 1) -> SegmentMap:
    """Segment the regions enclosed by linked edges.

    Non-edge pixels are labeled by 4-connectivity. Edge pixels are then
    absorbed in waves: each wave assigns every edge pixel that touches a
    labeled pixel to the touching segment whose mean (over its non-edge
    pixels) is closest to the pixel value, lowest label on ties. Edge pixels
    cut off from every region become segments of their own.
    """
    edges = link_edges(nonmax_suppress(sobel_gradient_field(grid), nms_threshold), dilate_radius)
    valid = grid.valid
    values = grid.filled(0.0)
    edge = edges.mask.astype(bool) & valid
    base = label_components(valid & ~edge)
    labels = base.labels.copy()
    count = base.segment_count
    if count:
        sums = np.bincount(labels.ravel(), weights=values.ravel(), minlength=count + 1)
        sizes = np.bincount(labels.ravel(), minlength=count + 1)
        means = sums[1:] / sizes[1:]

        rows, cols = labels.shape
        pending = edge.copy()
        while pending.any():
            updates = []
            for r, c in zip(*np.nonzero(pending)):
                best = None
                for dr, dc in _FOUR:
                    qr, qc = r + dr, c + dc
                    if 0 <= qr < rows and 0 <= qc < cols and labels[qr, qc]:
                        lab = labels[qr, qc]
                        key = (abs(values[r, c] - means[lab - 1]), lab)
                        if best is None or key < best:
                            best = key
                if best is not None:
                    updates.append((r, c, best[1]))
            if not updates:
                break
            for r, c, lab in updates:
                labels[r, c] = lab
                pending[r, c] = False
        edge = pending

    if edge.any():
        orphans = label_components(edge)
        labels = np.where(orphans.labels > 0, orphans.labels + count, labels)
        count += orphans.segment_count
    return SegmentMap(labels, count, grid.geo)
