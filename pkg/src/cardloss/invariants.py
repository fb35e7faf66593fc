"""Cardinality-like invariants of finite point clouds.

Both invariants measure the effective number of distinct points in a cloud
seen at an observation scale t: they equal 1 when all points coincide and
approach the cardinality as the points drift far apart.  For a cloud with
pairwise Euclidean distance matrix D and similarity matrix

    zeta = exp(-t * D)       (unit diagonal, entries in (0, 1])

the two quantities are

    magnitude = sum(w)        where w solves  zeta @ w = 1
    spread    = sum_i 1 / sum_j zeta[i, j]

Magnitude needs a linear solve, spread only row sums; they agree exactly on
clouds of one or two points.  Analytic gradients with respect to the point
coordinates are provided for both so they can drive gradient-based training:

    d magnitude / d x_k = sum_{j != k} 2 t w_k w_j exp(-t d_kj) (x_k - x_j) / d_kj
    d spread    / d x_k = sum_{j != k} t (1/r_k^2 + 1/r_j^2) exp(-t d_kj) (x_k - x_j) / d_kj

with r_i the i-th row sum of zeta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist

from .errors import InvalidArgumentError, SingularSimilarityError

#: Default collapse radius used when treating a cloud as a set.
DEDUP_TOL = 1e-9

#: Max-norm residual accepted for a weighting solve.
RESIDUAL_TOL = 1e-8

_JITTER = 1e-12


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
        raise InvalidArgumentError("points must form a non-empty 2-D array")
    if not np.isfinite(pts).all():
        raise InvalidArgumentError("points must be finite")
    return pts


@dataclass(frozen=True)
class PointCloud:
    """An ordered, immutable cloud of points in Euclidean space."""

    points: np.ndarray

    def __post_init__(self):
        pts = _as_points(self.points).copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def cardinality(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric pairwise distance matrix with zero diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise InvalidArgumentError("distance matrix must be square")
        if not np.isfinite(e).all() or (e < 0).any():
            raise InvalidArgumentError("distances must be finite and non-negative")
        if not np.array_equal(e, e.T):
            raise InvalidArgumentError("distance matrix must be symmetric")
        if np.diagonal(e).any():
            raise InvalidArgumentError("distance matrix diagonal must be zero")
        e = e.copy()
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)

    @property
    def cardinality(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class SimilarityMatrix:
    """exp(-scale * D) for a distance matrix D; unit diagonal, entries in (0, 1]."""

    entries: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise InvalidArgumentError("similarity matrix must be square")
        if not self.scale > 0:
            raise InvalidArgumentError("scale must be positive")
        if not np.isfinite(e).all() or (e <= 0).any() or (e > 1).any():
            raise InvalidArgumentError("similarities must lie in (0, 1]")
        if not np.array_equal(e, e.T):
            raise InvalidArgumentError("similarity matrix must be symmetric")
        if not (np.diagonal(e) == 1.0).all():
            raise InvalidArgumentError("similarity matrix diagonal must be one")
        e = e.copy()
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)


@dataclass(frozen=True)
class Weighting:
    """Solution of zeta @ w = 1 together with its achieved residual."""

    weights: np.ndarray
    residual: float
    regularized: bool = False


def _check_scale(scale: float) -> float:
    scale = float(scale)
    if not (math.isfinite(scale) and scale > 0):
        raise InvalidArgumentError(f"scale must be a positive real, got {scale!r}")
    return scale


def _prepared_distances(points: np.ndarray) -> np.ndarray:
    """Pairwise distances with +inf on the diagonal.

    The infinite diagonal makes the gradient expressions division-safe and
    lets off-diagonal minima be read with a plain ``min()``.
    """
    d = cdist(points, points)
    np.fill_diagonal(d, np.inf)
    return d


# ---------------------------------------------------------------------------
# compiled fast path
#
# Training evaluates an invariant and its gradient once per minibatch, so the
# per-call overhead of assembling the small matrices through numpy dominates
# the actual arithmetic.  The kernel below fuses the whole set-semantics
# evaluation into one compiled function: distance matrix, greedy collapse of
# points within ``tol``, similarity, Cholesky solve with residual check, and
# the gradient scattered back to the original rows (each merged member gets
# its group's gradient divided by the multiplicity).  It bails out
# (status != 0) only when the solve is not accepted; callers then rerun the
# numpy implementation, which owns the full fallback chain.

_MAGNITUDE = 0
_SPREAD = 1

_STATUS_OK = 0
_STATUS_SOLVE_FAILED = 2


def _invariant_kernel_py(pts, scale, tol, mode, want_grad):
    n, dim = pts.shape
    d = np.empty((n, n))
    minoff = np.inf
    for i in range(n):
        d[i, i] = np.inf
        for j in range(i + 1, n):
            s = 0.0
            for c in range(dim):
                t = pts[i, c] - pts[j, c]
                s += t * t
            r = np.sqrt(s)
            d[i, j] = r
            d[j, i] = r
            if r < minoff:
                minoff = r

    grad = np.zeros((n, dim))
    reps = np.empty(n, np.int64)
    group = np.empty(n, np.int64)
    mult = np.zeros(n, np.int64)
    if minoff > tol:
        m = n
        for i in range(n):
            reps[i] = i
            group[i] = i
            mult[i] = 1
    else:
        m = 0
        for i in range(n):
            g = -1
            for k in range(m):
                if d[i, reps[k]] <= tol:
                    g = k
                    break
            if g < 0:
                reps[m] = i
                group[i] = m
                mult[m] = 1
                m += 1
            else:
                group[i] = g
                mult[g] += 1

    z = np.empty((m, m))
    for a in range(m):
        z[a, a] = 1.0
        for b in range(a + 1, m):
            v = np.exp(-scale * d[reps[a], reps[b]])
            z[a, b] = v
            z[b, a] = v

    rep_grad = np.zeros((m, dim))
    if mode == _SPREAD:
        r_sum = np.empty(m)
        value = 0.0
        for a in range(m):
            s = 0.0
            for b in range(m):
                s += z[a, b]
            r_sum[a] = s
            value += 1.0 / s
        if want_grad:
            inv2 = 1.0 / (r_sum * r_sum)
            for a in range(m):
                ra = reps[a]
                for b in range(m):
                    if a != b:
                        rb = reps[b]
                        coef = scale * z[a, b] * (inv2[a] + inv2[b]) / d[ra, rb]
                        for c in range(dim):
                            rep_grad[a, c] += coef * (pts[ra, c] - pts[rb, c])
    else:
        # magnitude: Cholesky factorization of z, two triangular solves
        low = z.copy()
        for k in range(m):
            s = low[k, k]
            for q in range(k):
                s -= low[k, q] * low[k, q]
            if s <= 0.0:
                return _STATUS_SOLVE_FAILED, 0.0, grad
            lkk = np.sqrt(s)
            low[k, k] = lkk
            for i in range(k + 1, m):
                s = low[i, k]
                for q in range(k):
                    s -= low[i, q] * low[k, q]
                low[i, k] = s / lkk
        w = np.ones(m)
        for i in range(m):
            s = w[i]
            for q in range(i):
                s -= low[i, q] * w[q]
            w[i] = s / low[i, i]
        for i in range(m - 1, -1, -1):
            s = w[i]
            for q in range(i + 1, m):
                s -= low[q, i] * w[q]
            w[i] = s / low[i, i]
        residual = 0.0
        for a in range(m):
            s = -1.0
            for b in range(m):
                s += z[a, b] * w[b]
            r = abs(s)
            if r > residual:
                residual = r
        if residual > RESIDUAL_TOL:
            return _STATUS_SOLVE_FAILED, 0.0, grad
        value = 0.0
        for a in range(m):
            value += w[a]
        if want_grad:
            two_t = 2.0 * scale
            for a in range(m):
                ra = reps[a]
                for b in range(m):
                    if a != b:
                        rb = reps[b]
                        coef = two_t * w[a] * w[b] * z[a, b] / d[ra, rb]
                        for c in range(dim):
                            rep_grad[a, c] += coef * (pts[ra, c] - pts[rb, c])

    if want_grad:
        for i in range(n):
            g = group[i]
            share = 1.0 / mult[g]
            for c in range(dim):
                grad[i, c] = rep_grad[g, c] * share
    return _STATUS_OK, value, grad


_compiled_kernel = None
_kernel_unavailable = False


def _fast_invariant(points, scale, tol, mode, want_grad):
    """Compiled set-semantics invariant; (status, value, member gradients).

    Points within ``tol`` of an earlier point are collapsed onto it before
    evaluation, exactly like :func:`dedup`.  Compiles lazily on first use.
    If numba is unavailable the status is always a solve failure so callers
    take the numpy route.
    """
    global _compiled_kernel, _kernel_unavailable
    if _kernel_unavailable:
        return _STATUS_SOLVE_FAILED, 0.0, np.zeros_like(points)
    if _compiled_kernel is None:
        try:
            from numba import njit
            _compiled_kernel = njit(cache=True)(_invariant_kernel_py)
        except ImportError:
            _kernel_unavailable = True
            return _STATUS_SOLVE_FAILED, 0.0, np.zeros_like(points)
    return _compiled_kernel(points, scale, tol, mode, want_grad)


def _similarity_from(d_infdiag: np.ndarray, scale: float) -> np.ndarray:
    z = np.exp(d_infdiag * (-scale))
    np.fill_diagonal(z, 1.0)
    return z


def _solve_weights(zeta: np.ndarray):
    """Solve zeta @ w = 1, returning (w, residual, regularized).

    Tries a symmetric positive-definite factorization first, then a pivoted
    general factorization, then one retry with 1e-12 added to the diagonal.
    The residual is always measured against the original matrix.
    """
    n = zeta.shape[0]
    ones = np.ones(n)

    def residual_of(w):
        return float(np.abs(zeta @ w - ones).max())

    try:
        w = cho_solve(cho_factor(zeta, lower=True, check_finite=False), ones,
                      check_finite=False)
        res = residual_of(w)
        if res <= RESIDUAL_TOL:
            return w, res, False
    except np.linalg.LinAlgError:
        pass

    try:
        w = np.linalg.solve(zeta, ones)
        res = residual_of(w)
        if res <= RESIDUAL_TOL:
            return w, res, False
    except np.linalg.LinAlgError:
        pass

    jittered = zeta + _JITTER * np.eye(n)
    try:
        try:
            w = cho_solve(cho_factor(jittered, lower=True, check_finite=False),
                          ones, check_finite=False)
        except np.linalg.LinAlgError:
            w = np.linalg.solve(jittered, ones)
        res = residual_of(w)
        if res <= RESIDUAL_TOL:
            return w, res, True
    except np.linalg.LinAlgError:
        pass

    raise SingularSimilarityError(
        "could not solve for a weighting: coincident points not deduplicated, "
        "or numerically degenerate similarity matrix")


def _magnitude_core(points, d_infdiag, scale, want_grad=True):
    """Magnitude and (optionally) its coordinate gradient.

    ``d_infdiag`` must be the pairwise distance matrix of ``points`` with the
    diagonal replaced by +inf.
    """
    zeta = _similarity_from(d_infdiag, scale)
    w, _, _ = _solve_weights(zeta)
    value = float(w.sum())
    if not want_grad:
        return value, None
    k = zeta * np.outer(w, w)
    k /= d_infdiag
    grad = (2.0 * scale) * (k.sum(axis=1)[:, None] * points - k @ points)
    return value, grad


def _spread_core(points, d_infdiag, scale, want_grad=True):
    """Spread and (optionally) its coordinate gradient."""
    zeta = _similarity_from(d_infdiag, scale)
    r = zeta.sum(axis=1)
    value = float((1.0 / r).sum())
    if not want_grad:
        return value, None
    c = r ** -2.0
    t = zeta * (c[:, None] + c[None, :])
    t /= d_infdiag
    grad = scale * (t.sum(axis=1)[:, None] * points - t @ points)
    return value, grad


def _greedy_groups(d_infdiag: np.ndarray, tol: float):
    """Greedy single-linkage grouping of points that sit within ``tol``.

    A point joins the first already-seen representative within ``tol``;
    otherwise it becomes a new representative.  Returns (representative row
    indices, group multiplicities, original index -> group index map).
    """
    n = d_infdiag.shape[0]
    reps: list[int] = []
    mults: list[int] = []
    group = np.empty(n, dtype=np.intp)
    for i in range(n):
        for g, r in enumerate(reps):
            if d_infdiag[i, r] <= tol:
                group[i] = g
                mults[g] += 1
                break
        else:
            group[i] = len(reps)
            reps.append(i)
            mults.append(1)
    return np.array(reps, dtype=np.intp), np.array(mults, dtype=np.intp), group


# ---------------------------------------------------------------------------
# public operations


def distance_matrix(cloud: PointCloud) -> DistanceMatrix:
    """Pairwise Euclidean distances of a cloud."""
    return DistanceMatrix(cdist(cloud.points, cloud.points))


def similarity_matrix(distances: DistanceMatrix, scale: float = 1.0) -> SimilarityMatrix:
    """Entrywise exp(-scale * D); ``scale`` acts as a dilation of the cloud."""
    scale = _check_scale(scale)
    z = np.exp(-scale * distances.entries)
    return SimilarityMatrix(z, scale)


def solve_weighting(similarity: SimilarityMatrix) -> Weighting:
    """Weight vector w with zeta @ w = 1, accepted at residual <= 1e-8."""
    w, res, reg = _solve_weights(np.asarray(similarity.entries))
    return Weighting(w, res, reg)


def magnitude(cloud: PointCloud, scale: float = 1.0) -> float:
    """Total weighting mass of the cloud dilated by ``scale``.

    The cloud should be duplicate-free (see :func:`dedup`); exact duplicates
    make the similarity matrix singular.
    """
    scale = _check_scale(scale)
    d = _prepared_distances(cloud.points)
    value, _ = _magnitude_core(cloud.points, d, scale, want_grad=False)
    return value


def spread(cloud: PointCloud, scale: float = 1.0) -> float:
    """Sum of inverse similarity row sums; 1 <= spread <= cardinality."""
    scale = _check_scale(scale)
    d = _prepared_distances(cloud.points)
    value, _ = _spread_core(cloud.points, d, scale, want_grad=False)
    return value


def scale_scan(cloud: PointCloud, t_grid, which: str = "magnitude"):
    """Evaluate one invariant over an increasing grid of scales.

    Returns a list of (t, value) pairs.  Scales where the weighting solve
    fails are recorded as NaN rather than aborting the scan.
    """
    if which not in ("magnitude", "spread"):
        raise InvalidArgumentError(f"which must be 'magnitude' or 'spread', got {which!r}")
    grid = [float(t) for t in t_grid]
    if not grid:
        raise InvalidArgumentError("scale grid must be non-empty")
    if any(not (math.isfinite(t) and t > 0) for t in grid):
        raise InvalidArgumentError("scale grid entries must be positive reals")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidArgumentError("scale grid must be strictly increasing")

    core = _magnitude_core if which == "magnitude" else _spread_core
    d = _prepared_distances(cloud.points)
    out = []
    for t in grid:
        try:
            value, _ = core(cloud.points, d, t, want_grad=False)
        except SingularSimilarityError:
            value = math.nan
        out.append((t, value))
    return out


def magnitude_gradient(cloud: PointCloud, scale: float = 1.0) -> np.ndarray:
    """Gradient of :func:`magnitude` with respect to every point coordinate.

    Requires pairwise separation above the dedup tolerance, since the
    expression divides by pairwise distances.
    """
    scale = _check_scale(scale)
    d = _prepared_distances(cloud.points)
    if cloud.cardinality > 1 and float(d.min()) <= DEDUP_TOL:
        raise InvalidArgumentError(
            "gradient undefined for clouds with points closer than the dedup tolerance")
    _, grad = _magnitude_core(cloud.points, d, scale)
    return grad


def spread_gradient(cloud: PointCloud, scale: float = 1.0) -> np.ndarray:
    """Gradient of :func:`spread` with respect to every point coordinate."""
    scale = _check_scale(scale)
    d = _prepared_distances(cloud.points)
    if cloud.cardinality > 1 and float(d.min()) <= DEDUP_TOL:
        raise InvalidArgumentError(
            "gradient undefined for clouds with points closer than the dedup tolerance")
    _, grad = _spread_core(cloud.points, d, scale)
    return grad


def dedup(cloud: PointCloud, tol: float = DEDUP_TOL):
    """Collapse near-identical points.

    Greedy single-linkage: scanning in order, a point joins the first
    representative within ``tol``; otherwise it opens a new group.  Returns
    (deduplicated cloud, group multiplicities, original -> group index map).
    Representatives are the first-seen member of each group, so they remain
    pairwise more than ``tol`` apart.
    """
    tol = float(tol)
    if not (math.isfinite(tol) and tol >= 0):
        raise InvalidArgumentError("tol must be a non-negative real")
    d = _prepared_distances(cloud.points)
    reps, mults, group = _greedy_groups(d, tol)
    return PointCloud(cloud.points[reps]), mults, group


def diameter(cloud: PointCloud) -> float:
    """Largest pairwise distance; 0.0 for a single point."""
    if cloud.cardinality == 1:
        return 0.0
    return float(cdist(cloud.points, cloud.points).max())
