"""k-means in band space and unsupervised classification of band stacks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidParameter, TooFewDistinctSamples
from .raster import BandStack, GeoTransform, RasterGrid


@dataclass(frozen=True, eq=False)
class ClusterModel:
    k: int
    centroids: np.ndarray  # (k, bands)
    inertia: float
    iterations: int
    converged: bool
    seed: int | None = None
    inertia_trace: tuple[float, ...] = ()
    sizes: np.ndarray | None = None
    variances: np.ndarray | None = None  # per-class, per-band variance of training samples

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def to_dict(self) -> dict:
        out = {
            "k": self.k,
            "centroids": self.centroids.tolist(),
            "inertia": self.inertia,
            "iterations": self.iterations,
            "converged": self.converged,
            "seed": self.seed,
        }
        if self.sizes is not None:
            out["sizes"] = [int(s) for s in self.sizes]
        if self.variances is not None:
            out["variances"] = self.variances.tolist()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


@dataclass(frozen=True, eq=False)
class ClassMap:
    labels: np.ndarray  # int64 in 0..k, 0 = nodata
    k: int
    names: dict[int, str] = field(default_factory=dict)
    geo: GeoTransform | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    @property
    def valid(self) -> np.ndarray:
        return self.labels > 0

    @classmethod
    def from_grid(cls, grid: RasterGrid, k: int | None = None, names: dict[int, str] | None = None) -> "ClassMap":
        """Read class ids from a grid; nodata cells and zeros become label 0."""
        vals = grid.filled(0.0)
        if np.any(vals < 0) or np.any(vals != np.round(vals)):
            raise InvalidParameter("class grids must hold non-negative integer ids")
        labels = vals.astype(np.int64)
        top = int(labels.max(initial=0))
        if k is None:
            k = top
        elif top > k:
            raise InvalidParameter(f"class id {top} exceeds k={k}")
        return cls(labels, k, dict(names or {}), grid.geo)

    def as_grid(self) -> RasterGrid:
        return RasterGrid.from_array(self.labels.astype(np.float64), self.labels > 0, None, self.geo)


def _as_samples(samples) -> np.ndarray:
    try:
        arr = np.asarray(samples, dtype=np.float64)
    except ValueError:
        raise DimensionMismatch("sample vectors differ in length") from None
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionMismatch(f"samples must be a sequence of vectors, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameter("samples must be finite")
    return arr


def _sq_dist(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - centroids[None, :, :]
    return np.einsum("nkb,nkb->nk", diff, diff)


def _assign(x: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """0-based nearest-centroid labels (argmin keeps the lowest index on ties) and their distances."""
    d2 = _sq_dist(x, centroids)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(len(x)), labels]


def kmeans_fit(
    samples,
    k: int,
    seed: int = 42,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> ClusterModel:
    """Lloyd's algorithm seeded with ``k`` distinct samples drawn uniformly at random.

    Each iteration assigns samples to their nearest centroid, then moves the
    centroids to the assigned means. An empty cluster is re-seeded at the
    sample farthest from its own centroid. Stops once no centroid moves more
    than ``tol`` or after ``max_iter`` updates. ``inertia_trace`` records the
    objective after every assignment step, ending with the final one.
    """
    if k < 1:
        raise InvalidParameter(f"k must be >= 1, got {k}")
    if tol < 0 or max_iter < 0:
        raise InvalidParameter("tol and max_iter must be non-negative")
    x = _as_samples(samples)
    distinct = np.unique(x, axis=0)
    if len(distinct) < k:
        raise TooFewDistinctSamples(f"k={k} clusters need {k} distinct samples, found {len(distinct)}")

    rng = np.random.default_rng(seed)
    centroids = distinct[rng.choice(len(distinct), size=k, replace=False)].copy()
    trace = []
    converged = False
    iterations = 0
    for _ in range(max_iter):
        labels, dist = _assign(x, centroids)
        trace.append(float(dist.sum()))
        updated = np.empty_like(centroids)
        spare = dist.copy()
        for j in range(k):
            members = x[labels == j]
            if len(members):
                updated[j] = members.mean(axis=0)
            else:
                far = int(np.argmax(spare))
                updated[j] = x[far]
                spare[far] = -1.0
        shift = float(np.max(np.sqrt(np.sum((updated - centroids) ** 2, axis=1))))
        centroids = updated
        iterations += 1
        if shift <= tol:
            converged = True
            break

    labels, dist = _assign(x, centroids)
    inertia = float(dist.sum())
    trace.append(inertia)
    sizes = np.bincount(labels, minlength=k)
    variances = np.zeros_like(centroids)
    for j in range(k):
        if sizes[j]:
            variances[j] = x[labels == j].var(axis=0)
    return ClusterModel(k, centroids, inertia, iterations, converged, seed, tuple(trace), sizes, variances)


def kmeans_assign(model: ClusterModel, samples) -> np.ndarray:
    """Nearest-centroid labels 1..k; ties go to the lowest centroid index."""
    x = _as_samples(samples)
    if x.shape[1] != model.dim:
        raise DimensionMismatch(f"samples have {x.shape[1]} bands, model expects {model.dim}")
    labels, _ = _assign(x, model.centroids)
    return labels + 1


def classify_stack(
    stack: BandStack,
    k: int,
    seed: int = 42,
    max_iter: int = 100,
    tol: float = 1e-6,
    sample_cap: int = 100_000,
) -> tuple[ClassMap, ClusterModel]:
    """Cluster valid pixels and label every one of them.

    When there are more valid pixels than ``sample_cap`` the model is fitted on
    a seeded uniform subsample. Classes are renumbered so class 1 covers the
    most pixels (ties keep centroid order).
    """
    if sample_cap < 1:
        raise InvalidParameter(f"sample_cap must be >= 1, got {sample_cap}")
    vectors = stack.pixel_vectors()
    if len(vectors) > sample_cap:
        pick = np.random.default_rng([seed, 1]).choice(len(vectors), size=sample_cap, replace=False)
        training = vectors[np.sort(pick)]
    else:
        training = vectors
    if len(training) == 0:
        raise TooFewDistinctSamples("stack has no valid pixels")
    model = kmeans_fit(training, k, seed, max_iter, tol)
    raw = kmeans_assign(model, vectors) - 1

    counts = np.bincount(raw, minlength=k)
    order = np.argsort(-counts, kind="stable")
    rank = np.empty(k, dtype=np.int64)
    rank[order] = np.arange(k)

    labels = np.zeros(stack.shape, dtype=np.int64)
    labels[stack.valid] = rank[raw] + 1
    model = ClusterModel(
        k,
        model.centroids[order],
        model.inertia,
        model.iterations,
        model.converged,
        seed,
        model.inertia_trace,
        model.sizes[order],
        model.variances[order],
    )
    return ClassMap(labels, k, {}, stack.geo), model
