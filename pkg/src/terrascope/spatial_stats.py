"""General G statistic for clustering of high versus low values.

    G(d)  = sum_{i != j} w_ij(d) x_i x_j / sum_{i != j} x_i x_j
    E[G]  = sum_{i != j} w_ij(d) / (n (n - 1))

G above its expectation means large values sit near other large values;
below it, large values are dispersed among small ones. Significance comes
from a conditional permutation test.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

from ._parallel import ordered_map
from .errors import (
    AllZeroValues,
    DimensionMismatch,
    EmptyWeights,
    InvalidParameter,
    MalformedCsv,
    NegativeValue,
    NonpositiveDistance,
    TooFewObservations,
)
from .raster import RasterGrid

SCHEMES = ("binary", "inverse_distance")

# relative slack when deciding that a permuted statistic is at least as extreme
_TIE_RTOL = 1e-12
_PERM_CHUNK = 64


@dataclass(frozen=True, eq=False)
class SpatialWeights:
    """Ordered (i, j, w_ij) entries; both directions of every pair are stored."""

    n: int
    i: np.ndarray
    j: np.ndarray
    w: np.ndarray
    scheme: str
    d: float

    @property
    def sum_weights(self) -> float:
        return math.fsum(self.w)

    def __len__(self) -> int:
        return len(self.w)

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[self.i, self.j] = self.w
        return out


@dataclass(frozen=True)
class GResult:
    g: float
    expected_g: float
    n: int
    sum_weights: float
    permutation_p: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


def raster_observations(grid: RasterGrid) -> tuple[np.ndarray, np.ndarray]:
    """Cell-center coordinates and values of valid cells, row-major.

    Coordinates are world units when the grid is georeferenced, otherwise
    (col, row) cell units.
    """
    rows, cols = np.nonzero(grid.valid)
    cols_f = cols.astype(np.float64)
    rows_f = rows.astype(np.float64)
    if grid.geo is not None:
        g = grid.geo
        coords = np.column_stack([g.a * cols_f + g.b * rows_f + g.c, g.d * cols_f + g.e * rows_f + g.f])
    else:
        coords = np.column_stack([cols_f, rows_f])
    return coords, grid.values[rows, cols]


def build_weights(source, d: float, scheme: str = "binary") -> SpatialWeights:
    """Distance-band weights over a point list or the valid cells of a grid.

    Pairs with 0 < distance <= d get weight 1 (binary) or 1/distance
    (inverse_distance). Grid observations follow :func:`raster_observations`.
    """
    if scheme not in SCHEMES:
        raise InvalidParameter(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    if not d > 0:
        raise NonpositiveDistance(f"distance band must be > 0, got {d}")
    if isinstance(source, RasterGrid):
        coords, _ = raster_observations(source)
    else:
        coords = np.asarray(source, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise DimensionMismatch(f"points must be an (n, 2) array, got shape {coords.shape}")
    n = len(coords)
    if n < 2:
        raise TooFewObservations(f"weights need at least 2 observations, got {n}")

    pairs = cKDTree(coords).query_pairs(r=d, output_type="ndarray")
    if len(pairs):
        dist = np.hypot(*(coords[pairs[:, 0]] - coords[pairs[:, 1]]).T)
        keep = (dist > 0) & (dist <= d)
        pairs, dist = pairs[keep], dist[keep]
    else:
        dist = np.zeros(0)
    w = np.ones_like(dist) if scheme == "binary" else 1.0 / dist
    i = np.concatenate([pairs[:, 0], pairs[:, 1]]).astype(np.int64)
    j = np.concatenate([pairs[:, 1], pairs[:, 0]]).astype(np.int64)
    w = np.concatenate([w, w])
    order = np.lexsort((j, i))
    return SpatialWeights(n, i[order], j[order], w[order], scheme, float(d))


def _check(values, weights: SpatialWeights) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64).ravel()
    if len(x) != weights.n:
        raise DimensionMismatch(f"{len(x)} values for {weights.n} weighted observations")
    if not np.all(np.isfinite(x)):
        raise InvalidParameter("values must be finite")
    if np.any(x < 0):
        raise NegativeValue("General G requires non-negative values")
    if np.count_nonzero(x) < 2:
        raise AllZeroValues("General G needs at least two positive values")
    if len(weights) == 0:
        raise EmptyWeights(f"no pairs lie within d={weights.d}")
    return x


def _cross_sum(x: np.ndarray) -> float:
    """sum_{i != j} x_i x_j."""
    total = math.fsum(x)
    return math.fsum(x * (total - x))


def general_g(values, weights: SpatialWeights) -> GResult:
    x = _check(values, weights)
    n = weights.n
    numerator = math.fsum(weights.w * x[weights.i] * x[weights.j])
    sum_w = weights.sum_weights
    return GResult(numerator / _cross_sum(x), sum_w / (n * (n - 1)), n, sum_w)


def g_permutation_test(values, weights: SpatialWeights, n_perm: int = 999, seed: int = 42) -> GResult:
    """Two-sided conditional permutation test of G against E[G].

    p = (1 + #{|G_perm - E| >= |G_obs - E|}) / (n_perm + 1). Permutations are
    drawn in fixed-size chunks from child streams of ``seed``, so the result
    does not depend on the worker count.
    """
    if n_perm < 99:
        raise InvalidParameter(f"n_perm must be >= 99, got {n_perm}")
    x = _check(values, weights)
    base = general_g(x, weights)
    denom = _cross_sum(x)
    wi, wj, w = weights.i, weights.j, weights.w

    def stat(xp: np.ndarray) -> float:
        return float(np.dot(w, xp[wi] * xp[wj])) / denom

    sizes = [_PERM_CHUNK] * (n_perm // _PERM_CHUNK)
    if n_perm % _PERM_CHUNK:
        sizes.append(n_perm % _PERM_CHUNK)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def run_chunk(job) -> list[float]:
        size, ss = job
        rng = np.random.default_rng(ss)
        return [stat(rng.permutation(x)) for _ in range(size)]

    draws = np.array([g for chunk in ordered_map(run_chunk, zip(sizes, streams)) for g in chunk])
    e = base.expected_g
    observed = abs(stat(x) - e)
    slack = _TIE_RTOL * max(abs(e), abs(base.g), 1e-300)
    extreme = int(np.count_nonzero(np.abs(draws - e) >= observed - slack))
    return GResult(base.g, e, base.n, base.sum_weights, (1 + extreme) / (n_perm + 1))


def read_points(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray]:
    """CSV rows ``x,y,value``; a non-numeric first row is taken as a header."""
    coords, vals = [], []
    with open(path, newline="") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields or not "".join(fields).strip() or fields[0].lstrip().startswith("#"):
                continue
            if len(fields) != 3:
                raise MalformedCsv(f"{path}:{lineno}: expected 'x,y,value', got {len(fields)} fields")
            try:
                x, y, v = (float(f) for f in fields)
            except ValueError:
                if lineno == 1:
                    continue
                raise MalformedCsv(f"{path}:{lineno}: non-numeric field in {fields}") from None
            coords.append((x, y))
            vals.append(v)
    return np.array(coords, dtype=np.float64).reshape(-1, 2), np.array(vals, dtype=np.float64)
