"""Functional dependence scores on samples.

Implements the rank-based coefficients (the univariate consecutive-rank
coefficient and its multivariate nearest-neighbor generalization), a kernel
association measure over a 1-NN graph with a Gaussian RBF kernel, and a
volume-of-parallelepiped baseline.  All scores are pure functions of their
inputs: nearest-neighbor ties break to the lowest index, and internal
subsampling is strided, so repeated calls are bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateY

_KDTREE_MAX_DIM = 16
_CROSS_TERM_CAP = 2000


@dataclass(frozen=True)
class RankVectors:
    """Upper and lower rank counts of an output sample.

    r[i] counts indices j with Y[j] <= Y[i]; l[i] counts indices j with
    Y[j] >= Y[i].  For distinct values r is a permutation of 1..n and
    l = n + 1 - r.
    """

    r: np.ndarray
    l: np.ndarray


@dataclass(frozen=True)
class NeighborMap:
    """nu[i] is the index of the Euclidean nearest neighbor of row i."""

    nu: np.ndarray


@dataclass(frozen=True)
class DependenceScore:
    value: float
    measure: str


def compute_ranks(y: np.ndarray) -> RankVectors:
    """Exact <=/>=-counting ranks, ties included."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < 2:
        raise ValueError("need at least two observations")
    order = np.sort(y)
    r = np.searchsorted(order, y, side="right").astype(np.int64)
    l = (n - np.searchsorted(order, y, side="left")).astype(np.int64)
    return RankVectors(r=r, l=l)


def _standardize(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return (X - mean) / std


def nearest_neighbors(X: np.ndarray) -> NeighborMap:
    """1-NN map with deterministic lowest-index tie-breaking.

    Uses a k-d tree for dimension <= 16 and brute force beyond that.  Ties
    (exact-duplicate points included) resolve to the lowest index; rows whose
    tie set may extend past the query window fall back to a brute-force scan.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n < 2:
        raise ValueError("need at least two rows")
    if d > _KDTREE_MAX_DIM:
        return NeighborMap(_brute_force_nn(X))
    k = min(n, 4)
    dist, idx = cKDTree(X).query(X, k=k)
    rows = np.arange(n)
    valid = idx != rows[:, None]
    # distance to the closest non-self candidate
    dmin = np.where(valid, dist, np.inf).min(axis=1)
    tol = dmin * (1 + 1e-12) + 1e-300
    tie = valid & (dist <= tol[:, None])
    nu = np.where(tie, idx, n).min(axis=1).astype(np.int64)
    # the window may hide an equidistant lower index when its far edge still
    # touches the tie distance
    unsure = (tie.sum(axis=1) > 1) | ((k < n) & (dist[:, -1] <= tol))
    for i in np.flatnonzero(unsure):
        nu[i] = _brute_force_row(X, i)
    return NeighborMap(nu)


def _brute_force_nn(X: np.ndarray) -> np.ndarray:
    n = len(X)
    nu = np.empty(n, dtype=np.int64)
    for i in range(n):
        nu[i] = _brute_force_row(X, i)
    return nu


def _brute_force_row(X: np.ndarray, i: int) -> int:
    diff = X - X[i]
    d2 = np.einsum("ij,ij->i", diff, diff)
    d2[i] = np.inf
    dmin = d2.min()
    return int(np.flatnonzero(d2 <= dmin * (1 + 1e-12) + 1e-300)[0])


def chatterjee_xi(x: np.ndarray, y: np.ndarray) -> DependenceScore:
    """Univariate rank coefficient from consecutive rank differences.

    Pairs are sorted by x (stable). With all values distinct the result
    equals 1 - 3*sum|r_{i+1}-r_i| / (n^2-1).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = len(x)
    if n < 2 or len(y) != n:
        raise ValueError("need two equal-length samples of size >= 2")
    order = np.argsort(x, kind="stable")
    ranks = compute_ranks(y[order])
    num = int(n) * int(np.abs(np.diff(ranks.r)).sum())
    den = 2 * int((ranks.l * (n - ranks.l)).sum())
    if den == 0:
        raise DegenerateY("constant output column")
    return DependenceScore(1.0 - num / den, "xi")


def codec(X: np.ndarray, y: np.ndarray, form: str = "min",
          ranks: RankVectors | None = None) -> DependenceScore:
    """Multivariate dependence via nearest-neighbor rank comparison.

    `form` selects between the direct minimum-based numerator and the
    algebraically rewritten numerator (n/2)(R + S - sum|r_i - r_nu(i)|) - L;
    the two agree exactly.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).reshape(-1)
    n = len(y)
    if n < 3:
        raise ValueError("need at least three observations")
    if ranks is None:
        ranks = compute_ranks(y)
    r, l = ranks.r, ranks.l
    nu = nearest_neighbors(_standardize(X)).nu
    den = int((l * (n - l)).sum())
    if den == 0:
        raise DegenerateY("constant output column")
    r_nu = r[nu]
    if form == "min":
        num = int((n * np.minimum(r, r_nu) - l * l).sum())
    elif form == "rewritten":
        R = int(r.sum())
        S = int(r_nu.sum())
        L = int((l * l).sum())
        twice = n * (R + S - int(np.abs(r - r_nu).sum())) - 2 * L
        return DependenceScore(twice / (2 * den), "codec")
    else:
        raise ValueError(f"unknown form {form!r}")
    return DependenceScore(num / den, "codec")


def default_bandwidth(y: np.ndarray) -> float:
    """Median pairwise |y_i - y_j| on a strided subsample of <= 500 rows."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(y) > 500:
        stride = int(np.ceil(len(y) / 500))
        y = y[::stride]
    diffs = np.abs(y[:, None] - y[None, :])
    vals = diffs[np.triu_indices(len(y), k=1)]
    med = float(np.median(vals))
    if med > 0:
        return med
    pos = vals[vals > 0]
    if len(pos):
        return float(pos.mean())
    raise DegenerateY("constant output column")


def kmac(X: np.ndarray, y: np.ndarray, bandwidth: float | None = None) -> DependenceScore:
    """Kernel association over the 1-NN graph with a Gaussian RBF kernel.

    score = [mean_i k(y_i, y_nu(i)) - cross] / [k(0) - cross] where `cross`
    is the mean kernel value over distinct pairs (subsampled above 2000
    rows).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).reshape(-1)
    n = len(y)
    if n < 3:
        raise ValueError("need at least three observations")
    if bandwidth is None:
        bandwidth = default_bandwidth(y)
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    nu = nearest_neighbors(_standardize(X)).nu
    inv2bw2 = 1.0 / (2.0 * bandwidth * bandwidth)
    local = float(np.exp(-((y - y[nu]) ** 2) * inv2bw2).mean())
    ys = y
    if n > _CROSS_TERM_CAP:
        stride = int(np.ceil(n / _CROSS_TERM_CAP))
        ys = y[::stride]
    m = len(ys)
    K = np.exp(-((ys[:, None] - ys[None, :]) ** 2) * inv2bw2)
    cross = float((K.sum() - m) / (m * (m - 1)))
    den = 1.0 - cross
    if den == 0:
        raise DegenerateY("kernel sees a constant output column")
    return DependenceScore((local - cross) / den, "kmac")


def parallelepiped_volumes(Z: np.ndarray) -> np.ndarray:
    """|det| of the difference vectors from each row to its dim nearest
    neighbors in the given joint space (rows beyond the self match)."""
    Z = np.asarray(Z, dtype=float)
    n, dim = Z.shape
    if n < dim + 1:
        raise ValueError("need at least dim + 1 rows")
    _, idx = cKDTree(Z).query(Z, k=min(n, dim + 2))
    rows = np.arange(n)
    valid = idx != rows[:, None]
    # first `dim` non-self neighbors per row, still in distance order
    take = valid & (np.cumsum(valid, axis=1) <= dim)
    nbrs = idx[take].reshape(n, dim)
    diffs = Z[nbrs] - Z[:, None, :]
    return np.abs(np.linalg.det(diffs))


def volume_score(X: np.ndarray, y: np.ndarray) -> DependenceScore:
    """Baseline score from mean parallelepiped volume in joint (x, y) space.

    On data sampled densely from a function the d+1 difference vectors to the
    nearest neighbors are nearly linearly dependent, so volumes approach
    zero; the score 1/(1 + mean volume) makes higher mean more dependent.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).reshape(-1)
    n, d = X.shape
    if n < d + 2:
        raise ValueError("need at least d + 2 observations")
    Z = _standardize(np.column_stack([X, y]))
    vols = parallelepiped_volumes(Z)
    return DependenceScore(1.0 / (1.0 + float(vols.mean())), "volume")
