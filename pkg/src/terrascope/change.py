"""Two-date change detection.

Methods: image differencing, principal components of the difference stack,
post-classification comparison, change vector analysis, thematic change, and
multi-scale fusion of differencing over a 2x2-mean pyramid. Continuous
methods flag pixels whose change statistic exceeds mean + k_sigma * sd of
that statistic over co-valid pixels (population sd).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ._parallel import ordered_map
from .cluster import ClassMap
from .errors import (
    DegenerateCovariance,
    DimensionMismatch,
    EmptyTheme,
    InvalidParameter,
    NoValidPixels,
)
from .raster import BandStack, GeoTransform, RasterGrid


@dataclass(frozen=True, eq=False)
class ChangeResult:
    mask: np.ndarray  # uint8, 1 = changed
    valid: np.ndarray
    method: str
    threshold_used: float = math.nan
    magnitude: RasterGrid | None = None
    direction: RasterGrid | None = None
    level_masks: tuple[np.ndarray, ...] = ()
    geo: GeoTransform | None = None

    @property
    def changed(self) -> int:
        return int(self.mask.sum())

    def mask_grid(self) -> RasterGrid:
        return RasterGrid.from_array(self.mask.astype(np.float64), self.valid, None, self.geo)


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    counts: np.ndarray  # rows: date-A classes, columns: date-B classes
    classes_a: tuple[int, ...]
    classes_b: tuple[int, ...]
    names_a: dict[int, str] = field(default_factory=dict)
    names_b: dict[int, str] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def unchanged(self) -> int:
        return int(np.trace(self.counts))


@dataclass(frozen=True, eq=False)
class PcaComponents:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns, orthonormal
    mean: np.ndarray
    covariance: np.ndarray

    def to_json(self) -> str:
        return json.dumps(
            {
                "eigenvalues": self.eigenvalues.tolist(),
                "loadings": self.eigenvectors.T.tolist(),
                "mean_difference": self.mean.tolist(),
                "covariance": self.covariance.tolist(),
            },
            indent=2,
        ) + "\n"


@dataclass(frozen=True, eq=False)
class Pyramid:
    levels: tuple[RasterGrid, ...]

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, i: int) -> RasterGrid:
        return self.levels[i]


def _same_shape(a, b) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"inputs differ in shape: {a.shape} vs {b.shape}")


def _same_bands(a: BandStack, b: BandStack) -> None:
    if a.count != b.count:
        raise DimensionMismatch(f"band counts differ: {a.count} vs {b.count}")
    _same_shape(a, b)


def _check_k(k_sigma: float) -> None:
    if not k_sigma > 0:
        raise InvalidParameter(f"k_sigma must be > 0, got {k_sigma}")


def sigma_threshold(stat: np.ndarray, k_sigma: float) -> float:
    """mean + k_sigma * sd of the statistic (population sd)."""
    if stat.size == 0:
        raise NoValidPixels("no co-valid pixels to threshold")
    return float(stat.mean() + k_sigma * stat.std())


def _layer(values: np.ndarray, valid: np.ndarray, geo) -> RasterGrid:
    return RasterGrid.from_array(values, valid, None, geo)


def image_difference(a: RasterGrid, b: RasterGrid, k_sigma: float = 2.0) -> ChangeResult:
    _check_k(k_sigma)
    _same_shape(a, b)
    valid = a.valid & b.valid
    diff = np.where(valid, b.filled(0.0) - a.filled(0.0), 0.0)
    absd = np.abs(diff)
    t = sigma_threshold(absd[valid], k_sigma)
    mask = (valid & (absd > t)).astype(np.uint8)
    return ChangeResult(mask, valid, "difference", t, _layer(diff, valid, a.geo), geo=a.geo)


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------


def _off_norm(m: np.ndarray) -> float:
    upper = m[np.triu_indices(len(m), 1)]
    return math.sqrt(2.0 * float(np.dot(upper, upper)))


def symmetric_eigen(matrix, rtol: float = 1e-10, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigen-decomposition of a real symmetric matrix.

    Sweeps plane rotations until the off-diagonal Frobenius norm is at most
    ``rtol`` times |trace| (or exactly zero). Returns eigenvalues in
    descending order and orthonormal eigenvectors as columns, each oriented
    so its largest-magnitude component is positive.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"need a square matrix, got shape {a.shape}")
    a = (a + a.T) / 2
    n = a.shape[0]
    v = np.eye(n)
    limit = rtol * abs(np.trace(a))
    for _ in range(max_sweeps):
        off = _off_norm(a)
        if off == 0 or off <= limit:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0:
                    continue
                app, aqq = a[p, p], a[q, q]
                g = 100.0 * abs(apq)
                if abs(app) + g == abs(app) and abs(aqq) + g == abs(aqq):
                    # below rounding of both diagonal entries
                    a[p, q] = a[q, p] = 0.0
                    continue
                h = aqq - app
                if abs(h) + g == abs(h):
                    t = apq / h
                else:
                    theta = h / (2 * apq)
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    v = v[:, order]
    for col in range(n):
        if v[np.argmax(np.abs(v[:, col])), col] < 0:
            v[:, col] = -v[:, col]
    return values, v


def pca_change(a: BandStack, b: BandStack, k_sigma: float = 2.0) -> tuple[ChangeResult, PcaComponents]:
    """Change score = |first principal component| of the per-pixel difference vectors."""
    _check_k(k_sigma)
    _same_bands(a, b)
    valid = a.valid & b.valid
    diff = (b.cube() - a.cube())[valid]
    if len(diff) == 0:
        raise NoValidPixels("no co-valid pixels")
    mean = diff.mean(axis=0)
    centered = diff - mean
    cov = centered.T @ centered / len(diff)
    if np.trace(cov) == 0:
        raise DegenerateCovariance("difference stack has zero variance in every band")
    eigenvalues, eigenvectors = symmetric_eigen(cov)
    score = np.abs(centered @ eigenvectors[:, 0])
    t = sigma_threshold(score, k_sigma)
    full = np.zeros(a.shape)
    full[valid] = score
    mask = (valid & (full > t)).astype(np.uint8)
    result = ChangeResult(mask, valid, "pca", t, _layer(full, valid, a.geo), geo=a.geo)
    return result, PcaComponents(eigenvalues, eigenvectors, mean, cov)


# ---------------------------------------------------------------------------
# class-map methods
# ---------------------------------------------------------------------------


def postclass_compare(a: ClassMap, b: ClassMap) -> tuple[TransitionMatrix, ChangeResult]:
    _same_shape(a, b)
    valid = a.valid & b.valid
    ka = max(a.k, int(a.labels.max(initial=0)))
    kb = max(b.k, int(b.labels.max(initial=0)))
    la = a.labels[valid] - 1
    lb = b.labels[valid] - 1
    counts = np.bincount(la * kb + lb, minlength=ka * kb).reshape(ka, kb)
    mask = (valid & (a.labels != b.labels)).astype(np.uint8)
    matrix = TransitionMatrix(
        counts.astype(np.int64),
        tuple(range(1, ka + 1)),
        tuple(range(1, kb + 1)),
        dict(a.names),
        dict(b.names),
    )
    return matrix, ChangeResult(mask, valid, "postclass", geo=a.geo)


def thematic_change(a: ClassMap, b: ClassMap, theme: Iterable[int]) -> ChangeResult:
    """Gains into / losses from a set of classes; magnitude +1 gain, -1 loss."""
    theme = sorted(set(int(t) for t in theme))
    if not theme:
        raise EmptyTheme("theme must name at least one class")
    _same_shape(a, b)
    valid = a.valid & b.valid
    in_a = np.isin(a.labels, theme) & valid
    in_b = np.isin(b.labels, theme) & valid
    mask = (in_a ^ in_b).astype(np.uint8)
    signed = in_b.astype(np.float64) - in_a.astype(np.float64)
    return ChangeResult(mask, valid, "thematic", 0.5, _layer(signed, valid, a.geo), geo=a.geo)


# ---------------------------------------------------------------------------
# change vector analysis
# ---------------------------------------------------------------------------


def change_vector_analysis(a: BandStack, b: BandStack, k_sigma: float = 2.0) -> ChangeResult:
    _check_k(k_sigma)
    _same_bands(a, b)
    valid = a.valid & b.valid
    delta = np.where(valid[..., None], b.cube() - a.cube(), 0.0)
    # summing sorted squares makes the norm independent of band order
    magnitude = np.sqrt(np.sort(delta**2, axis=-1).sum(axis=-1))
    t = sigma_threshold(magnitude[valid], k_sigma)
    mask = (valid & (magnitude > t)).astype(np.uint8)
    direction = None
    if a.count == 2:
        angle = np.arctan2(delta[..., 1], delta[..., 0])
        angle[angle == -math.pi] = math.pi
        direction = _layer(angle, valid, a.geo)
    return ChangeResult(mask, valid, "cva", t, _layer(magnitude, valid, a.geo), direction, geo=a.geo)


# ---------------------------------------------------------------------------
# pyramid + fusion
# ---------------------------------------------------------------------------


def _halve(grid: RasterGrid) -> RasterGrid:
    rows, cols = grid.shape
    r2, c2 = -(-rows // 2), -(-cols // 2)
    vals = np.zeros((2 * r2, 2 * c2))
    ok = np.zeros((2 * r2, 2 * c2))
    vals[:rows, :cols] = grid.filled(0.0)
    ok[:rows, :cols] = grid.valid
    sums = vals.reshape(r2, 2, c2, 2).sum(axis=(1, 3))
    counts = ok.reshape(r2, 2, c2, 2).sum(axis=(1, 3))
    mean = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    geo = None
    if grid.geo is not None:
        g = grid.geo
        cx, cy = g.forward(0.5, 0.5)
        geo = GeoTransform(2 * g.a, 2 * g.b, cx, 2 * g.d, 2 * g.e, cy)
    return RasterGrid.from_array(mean, counts > 0, grid.nodata, geo)


def build_pyramid(grid: RasterGrid, levels: int) -> Pyramid:
    """Level 0 is the input; each further level averages valid cells of 2x2 blocks."""
    if levels < 1:
        raise InvalidParameter(f"levels must be >= 1, got {levels}")
    out = [grid]
    for _ in range(levels - 1):
        out.append(_halve(out[-1]))
    return Pyramid(tuple(out))


def _upsample(mask: np.ndarray, factor: int, shape: tuple[int, int]) -> np.ndarray:
    big = np.repeat(np.repeat(mask, factor, axis=0), factor, axis=1)
    return big[: shape[0], : shape[1]]


def multiscale_fuse(a: RasterGrid, b: RasterGrid, levels: int = 3, k_sigma: float = 2.0) -> ChangeResult:
    """Difference at every pyramid level, then majority vote at full resolution.

    Coarse masks are replicated back over the pixels each coarse cell covers.
    A pixel is changed when at least half of the levels flag it.
    """
    _check_k(k_sigma)
    _same_shape(a, b)
    pa = build_pyramid(a, levels)
    pb = build_pyramid(b, levels)
    per_level = ordered_map(lambda lv: image_difference(pa[lv], pb[lv], k_sigma), range(levels))
    base = per_level[0]
    full = [_upsample(r.mask, 2**lv, a.shape) & base.valid for lv, r in enumerate(per_level)]
    votes = np.sum(full, axis=0)
    fused = (base.valid & (2 * votes >= levels)).astype(np.uint8)
    return ChangeResult(
        fused,
        base.valid,
        "multiscale" if levels > 1 else base.method,
        base.threshold_used,
        base.magnitude,
        level_masks=tuple(m.astype(np.uint8) for m in full),
        geo=a.geo,
    )
