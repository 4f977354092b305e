"""Rectification: control-point affine fits, resampling, band normalization."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    CollinearPoints,
    DegenerateRange,
    DegenerateTransform,
    MalformedCsv,
    TooFewPoints,
)
from .raster import DEFAULT_NODATA, GeoTransform, RasterGrid

Point = tuple[float, float]


@dataclass(frozen=True)
class ControlPointSet:
    pairs: tuple[tuple[Point, Point], ...]

    def __len__(self) -> int:
        return len(self.pairs)

    @classmethod
    def from_pairs(cls, pairs) -> "ControlPointSet":
        return cls(tuple(((float(s[0]), float(s[1])), (float(t[0]), float(t[1]))) for s, t in pairs))


@dataclass(frozen=True)
class AffineFit:
    transform: GeoTransform
    rmse: float


def read_control_points(path: str | os.PathLike) -> ControlPointSet:
    """CSV rows ``src_col,src_row,dst_x,dst_y``; ``#`` starts a comment."""
    pairs = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = next(csv.reader([line]))
            if len(fields) != 4:
                raise MalformedCsv(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            try:
                sc, sr, dx, dy = (float(x) for x in fields)
            except ValueError:
                raise MalformedCsv(f"{path}:{lineno}: non-numeric field in {line!r}") from None
            pairs.append(((sc, sr), (dx, dy)))
    return ControlPointSet(tuple(pairs))


def fit_affine(points: ControlPointSet | Sequence) -> AffineFit:
    """Least-squares affine map from source pixels to targets via the normal equations.

    Both target coordinates share the 3x3 normal matrix built from
    ``[col, row, 1]`` rows; it is rejected as singular when its smallest
    eigenvalue falls below 1e-12 of its largest.
    """
    if not isinstance(points, ControlPointSet):
        points = ControlPointSet.from_pairs(points)
    if len(points) < 3:
        raise TooFewPoints(f"affine fit needs at least 3 control points, got {len(points)}")
    src = np.array([p[0] for p in points.pairs], dtype=np.float64)
    dst = np.array([p[1] for p in points.pairs], dtype=np.float64)
    design = np.column_stack([src, np.ones(len(src))])
    normal = design.T @ design
    eig = np.linalg.eigvalsh(normal)
    if eig[0] <= 1e-12 * eig[-1]:
        raise CollinearPoints("control points are collinear; affine fit is underdetermined")
    rhs = design.T @ dst
    coef = np.linalg.solve(normal, rhs)  # columns: x-coefficients, y-coefficients
    (a, d), (b, e), (c, f) = coef
    residual = design @ coef - dst
    rmse = math.sqrt(float(np.mean(np.sum(residual**2, axis=1))))
    return AffineFit(GeoTransform(float(a), float(b), float(c), float(d), float(e), float(f)), rmse)


def _as_transform(t) -> GeoTransform:
    if isinstance(t, GeoTransform):
        return t
    a, b, c, d, e, f = (float(v) for v in t)
    return GeoTransform(a, b, c, d, e, f)


def _compose(outer: GeoTransform, inner: GeoTransform) -> GeoTransform:
    """outer(inner(p))."""
    a = outer.a * inner.a + outer.b * inner.d
    b = outer.a * inner.b + outer.b * inner.e
    c = outer.a * inner.c + outer.b * inner.f + outer.c
    d = outer.d * inner.a + outer.e * inner.d
    e = outer.d * inner.b + outer.e * inner.e
    f = outer.d * inner.c + outer.e * inner.f + outer.f
    return GeoTransform(a, b, c, d, e, f)


def resample(
    grid: RasterGrid,
    transform,
    out_rows: int,
    out_cols: int,
    method: str = "nearest",
) -> RasterGrid:
    """Sample ``grid`` onto a new lattice.

    ``transform`` maps output pixel (col, row) to input pixel (col, row). Samples
    falling outside the input, or touching an invalid cell with nonzero weight,
    become nodata.
    """
    t = _as_transform(transform)
    if t.determinant == 0:
        raise DegenerateTransform("resample transform has zero determinant")
    rr, cc = np.mgrid[0:out_rows, 0:out_cols].astype(np.float64)
    src_c = t.a * cc + t.b * rr + t.c
    src_r = t.d * cc + t.e * rr + t.f
    vals = grid.values
    ok_in = grid.valid
    h, w = grid.shape

    if method == "nearest":
        ic = np.floor(src_c + 0.5).astype(np.int64)
        ir = np.floor(src_r + 0.5).astype(np.int64)
        inside = (ic >= 0) & (ic < w) & (ir >= 0) & (ir < h)
        icc = np.clip(ic, 0, w - 1)
        irc = np.clip(ir, 0, h - 1)
        out = vals[irc, icc]
        valid = inside & ok_in[irc, icc]
    elif method == "bilinear":
        c0 = np.floor(src_c)
        r0 = np.floor(src_r)
        fc = src_c - c0
        fr = src_r - r0
        c0 = c0.astype(np.int64)
        r0 = r0.astype(np.int64)
        out = np.zeros((out_rows, out_cols))
        valid = np.ones((out_rows, out_cols), dtype=bool)
        for dr, dc, wgt in (
            (0, 0, (1 - fr) * (1 - fc)),
            (0, 1, (1 - fr) * fc),
            (1, 0, fr * (1 - fc)),
            (1, 1, fr * fc),
        ):
            r = r0 + dr
            c = c0 + dc
            used = wgt != 0
            inside = (c >= 0) & (c < w) & (r >= 0) & (r < h)
            rc = np.clip(r, 0, h - 1)
            cc_ = np.clip(c, 0, w - 1)
            good = inside & ok_in[rc, cc_]
            valid &= good | ~used
            out += np.where(used & good, wgt * np.where(good, vals[rc, cc_], 0.0), 0.0)
    else:
        raise ValueError(f"method must be 'nearest' or 'bilinear', got {method!r}")

    geo = _compose(grid.geo, t) if grid.geo is not None else None
    nodata = grid.nodata if grid.nodata is not None else (None if valid.all() else DEFAULT_NODATA)
    return RasterGrid.from_array(out, valid, nodata, geo)


def normalize(grid: RasterGrid, mode: str = "minmax") -> RasterGrid:
    valid = grid.valid
    data = grid.values[valid]
    if mode == "minmax":
        lo, hi = (float(data.min()), float(data.max())) if data.size else (0.0, 0.0)
        if hi == lo:
            raise DegenerateRange("minmax normalization needs at least two distinct valid values")
        out = (grid.values - lo) / (hi - lo)
    elif mode == "zscore":
        sd = float(data.std()) if data.size else 0.0
        if sd == 0:
            raise DegenerateRange("zscore normalization needs nonzero standard deviation")
        out = (grid.values - data.mean()) / sd
    else:
        raise ValueError(f"mode must be 'minmax' or 'zscore', got {mode!r}")
    return grid.with_values(out, valid)
