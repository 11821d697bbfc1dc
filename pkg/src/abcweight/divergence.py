"""k-nearest-neighbour estimators of alpha-divergences and the Hellinger distance.

For samples ``X`` from ``p`` and ``Y`` from ``q`` the estimator of
``D_alpha(p || q) = int p^alpha q^(1 - alpha)`` is

    1/n_x * sum_i ((n_x - 1) rho_k(i)^e / (n_y nu_k(i)^e))^(1 - alpha) * B(k, alpha)

where ``rho_k(i)`` is the distance from ``X_i`` to its k-th nearest neighbour
in ``X`` (itself excluded), ``nu_k(i)`` the distance from ``X_i`` to its k-th
nearest neighbour in ``Y``, and ``e`` is either the dimension ``d`` or 1.
The Hellinger distance used throughout the package is ``1 - D_{1/2}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gammaln

__all__ = [
    "DivergenceEstimate",
    "as_sample_set",
    "b_constant",
    "knn_distance",
    "kth_neighbour_distances",
    "estimate_alpha_divergence",
    "estimate_hellinger",
]

NU_FLOOR = 1e-12

# brute force above this many pairwise distances is slow enough to prefer the tree
_AUTO_TREE_PAIRS = 4_000_000
_CHUNK_ELEMENTS = 2_000_000


@dataclass(frozen=True)
class DivergenceEstimate:
    value: float
    alpha: float
    k: int
    n_x: int
    n_y: int
    clamped: bool = False

    def __float__(self) -> float:
        return float(self.value)


def as_sample_set(points) -> np.ndarray:
    """Coerce ``points`` to a finite ``(n, d)`` float array.

    One-dimensional input is read as ``n`` scalar samples.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise ValueError(f"sample set must be an (n, d) matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("sample set contains non-finite entries")
    return arr


def b_constant(k: int, alpha: float) -> float:
    """Bias-correction constant ``Gamma(k)^2 / (Gamma(k-alpha+1) Gamma(k+alpha-1))``."""
    if int(k) != k or k < 2:
        raise ValueError(f"k must be an integer >= 2, got {k}")
    a = k - alpha + 1.0
    b = k + alpha - 1.0
    if a <= 0 or b <= 0:
        raise ValueError(f"gamma arguments must be positive, got {a} and {b}")
    return float(np.exp(2.0 * gammaln(k) - gammaln(a) - gammaln(b)))


def _brute_kth(queries: np.ndarray, reference: np.ndarray, k: int,
               exclude_self: bool) -> np.ndarray:
    n_q, d = queries.shape
    n_r = reference.shape[0]
    out = np.empty(n_q)
    rows = max(1, _CHUNK_ELEMENTS // max(1, n_r * d))
    for start in range(0, n_q, rows):
        stop = min(n_q, start + rows)
        diff = queries[start:stop, None, :] - reference[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diff, diff) if d > 1 else diff[..., 0] ** 2
        if exclude_self:
            idx = np.arange(start, stop)
            sq[idx - start, idx] = np.inf
        out[start:stop] = np.partition(sq, k - 1, axis=1)[:, k - 1]
    return np.sqrt(out)


def _tree_kth(queries: np.ndarray, reference: np.ndarray, k: int,
              exclude_self: bool) -> np.ndarray:
    # The tree only proposes candidates; distances are recomputed with the
    # brute-force arithmetic so both paths agree bit-for-bit.
    n_r = reference.shape[0]
    n_cand = min(n_r, k + 2 + int(exclude_self))
    _, idx = cKDTree(reference).query(queries, k=n_cand)
    idx = np.asarray(idx).reshape(queries.shape[0], n_cand)
    diff = queries[:, None, :] - reference[idx]
    d = queries.shape[1]
    sq = np.einsum("ijk,ijk->ij", diff, diff) if d > 1 else diff[..., 0] ** 2
    if exclude_self:
        sq[idx == np.arange(queries.shape[0])[:, None]] = np.inf
    sq.sort(axis=1)
    return np.sqrt(sq[:, k - 1])


def kth_neighbour_distances(queries, reference, k: int, exclude_self: bool = False,
                            method: str = "auto") -> np.ndarray:
    """Distance from every query row to its k-th nearest row of ``reference``.

    With ``exclude_self`` the queries must be ``reference`` itself and row ``i``
    is not counted as a neighbour of query ``i`` (duplicates elsewhere are).
    ``method`` is ``"brute"``, ``"kdtree"`` or ``"auto"``.
    """
    queries = as_sample_set(queries)
    reference = as_sample_set(reference)
    if queries.shape[1] != reference.shape[1]:
        raise ValueError("queries and reference differ in dimension")
    if exclude_self and queries.shape[0] != reference.shape[0]:
        raise ValueError("exclude_self requires queries to be the reference set")
    available = reference.shape[0] - int(exclude_self)
    if k < 1 or k > available:
        raise ValueError(f"need at least {k} eligible neighbours, have {available}")
    if method == "auto":
        method = "kdtree" if queries.shape[0] * reference.shape[0] > _AUTO_TREE_PAIRS else "brute"
    if method == "brute":
        return _brute_kth(queries, reference, k, exclude_self)
    if method == "kdtree":
        return _tree_kth(queries, reference, k, exclude_self)
    raise ValueError(f"unknown neighbour search method {method!r}")


def knn_distance(points, query_index: int, k: int, exclude_self: bool = True,
                 against=None) -> float:
    """k-th nearest neighbour distance of one point.

    The query is ``points[query_index]``; neighbours are searched in
    ``against`` when given, otherwise in ``points`` (with the query itself
    skipped when ``exclude_self`` is true).
    """
    points = as_sample_set(points)
    query = points[query_index:query_index + 1]
    if against is None:
        reference = points
        eligible = np.ones(len(points), dtype=bool)
        if exclude_self:
            eligible[query_index] = False
    else:
        reference = as_sample_set(against)
        eligible = np.ones(len(reference), dtype=bool)
    if reference.shape[1] != points.shape[1]:
        raise ValueError("dimension mismatch")
    if k < 1 or k > eligible.sum():
        raise ValueError(f"fewer than {k} eligible neighbours")
    diff = reference[eligible] - query
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    return float(np.sort(dist)[k - 1])


def estimate_alpha_divergence(X, Y, k: int = 4, alpha: float = 0.5,
                              exponent_dim: bool = True,
                              method: str = "auto") -> DivergenceEstimate:
    """kNN estimate of ``D_alpha(p || q)`` from ``X ~ p`` and ``Y ~ q``.

    The estimate is asymmetric: swap the arguments and the value changes.
    """
    X = as_sample_set(X)
    Y = as_sample_set(Y)
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    n_x, d = X.shape
    n_y = Y.shape[0]
    if int(k) != k or k < 2:
        raise ValueError(f"k must be an integer >= 2, got {k}")
    if n_x < k + 1:
        raise ValueError(f"X needs at least k+1={k + 1} points, has {n_x}")
    if n_y < k:
        raise ValueError(f"Y needs at least k={k} points, has {n_y}")
    B = b_constant(k, alpha)
    if alpha == 1.0:
        return DivergenceEstimate(1.0 * B, alpha, int(k), n_x, n_y)

    rho = kth_neighbour_distances(X, X, k, exclude_self=True, method=method)
    nu = kth_neighbour_distances(X, Y, k, method=method)
    nu = np.maximum(nu, NU_FLOOR)
    e = d if exponent_dim else 1
    # ratio in log space: rho**d can underflow for tight clusters in high d
    log_ratio = (np.log(n_x - 1) - np.log(n_y)
                 + e * (np.log(rho, where=rho > 0, out=np.full_like(rho, -np.inf))
                        - np.log(nu)))
    terms = np.exp((1.0 - alpha) * log_ratio)
    return DivergenceEstimate(float(np.mean(terms) * B), alpha, int(k), n_x, n_y)


def estimate_hellinger(X, Y, k: int = 4, exponent_dim: bool = True,
                       method: str = "auto") -> DivergenceEstimate:
    """Hellinger distance ``1 - D_{1/2}``, clamped to ``[0, 1]``."""
    raw = estimate_alpha_divergence(X, Y, k, 0.5, exponent_dim, method)
    value = 1.0 - raw.value
    clipped = min(1.0, max(0.0, value))
    return DivergenceEstimate(clipped, 0.5, raw.k, raw.n_x, raw.n_y,
                              clamped=clipped != value)
