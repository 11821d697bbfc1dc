"""Competing ways of weighting or reducing summary statistics.

* uniform weights,
* inverse standard deviation weights from a pilot pool,
* semi-automatic projection: regress each log10 parameter on the summaries
  and their 2nd to 4th powers and use the fitted values as new summaries,
* greedy subset selection by an approximate-sufficiency test.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .adapt import WeightObjectiveContext, inverse_sd_weights, selected_indices
from .divergence import estimate_alpha_divergence, estimate_hellinger
from .smc import GenerationPool, select_m_closest
from .summaries import WeightVector

__all__ = [
    "uniform_weights",
    "scaled_weights",
    "ScaledWeights",
    "ProjectionMatrix",
    "polynomial_features",
    "semiauto_project",
    "subset_select",
    "subset_weights",
]

log = logging.getLogger(__name__)

RIDGE = 1e-8
POWERS = 4


def uniform_weights(kappa: int) -> WeightVector:
    if kappa < 1:
        raise ValueError("kappa must be at least 1")
    return WeightVector.uniform(kappa)


def scaled_weights(pilot_summaries) -> WeightVector:
    """``w_i = 1 / sd_i`` over the pilot pool; constant columns get 0."""
    return WeightVector(inverse_sd_weights(pilot_summaries))


class ScaledWeights:
    """Strategy: 1/sd weights estimated from the first generation's pool, then held fixed."""

    def __init__(self):
        self.weights: Optional[WeightVector] = None

    def __call__(self, pool: GenerationPool) -> WeightVector:
        if self.weights is None:
            self.weights = scaled_weights(pool.summaries)
        return self.weights


def polynomial_features(summaries, powers: int = POWERS) -> np.ndarray:
    """``[s, s^2, ..., s^powers]`` blocks (no intercept column)."""
    S = np.atleast_2d(np.asarray(summaries, dtype=float))
    return np.hstack([S ** p for p in range(1, powers + 1)])


@dataclass
class ProjectionMatrix:
    """Per-parameter regressions on ``[1, s, s^2, s^3, s^4]``.

    ``coefficients`` is ``p x (1 + 4 kappa)`` in raw feature units, intercept
    first, then the ``s`` block, the ``s^2`` block and so on.  Projection
    itself goes through the standardized features the fit used, which is
    better conditioned than the raw polynomial.
    """

    coefficients: np.ndarray
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    std_coefficients: np.ndarray
    ridge: bool = False

    @property
    def dim(self) -> int:
        return self.coefficients.shape[0]

    def project(self, summaries) -> np.ndarray:
        F = polynomial_features(summaries)
        Z = (F - self.feature_mean) / self.feature_scale
        return self.std_coefficients[:, 0] + Z @ self.std_coefficients[:, 1:].T

    def to_dict(self) -> dict:
        return {"coefficients": self.coefficients.tolist(), "ridge": self.ridge}


def semiauto_project(pilot_thetas, pilot_summaries) -> ProjectionMatrix:
    """Least-squares fit of each log10 parameter on the expanded summaries.

    Constant feature columns carry no information and get zero coefficients
    (the intercept absorbs them).  A rank-deficient design switches to ridge
    regression with ``1e-8`` added to the Gram diagonal.
    """
    Y = np.asarray(pilot_thetas, dtype=float)
    Y = Y[:, None] if Y.ndim == 1 else Y
    F = polynomial_features(pilot_summaries)
    if F.shape[0] != Y.shape[0]:
        raise ValueError("pilot thetas and summaries differ in length")
    finite = np.all(np.isfinite(F), axis=1) & np.all(np.isfinite(Y), axis=1)
    F, Y = F[finite], Y[finite]
    mean = F.mean(axis=0)
    scale = F.std(axis=0)
    live = scale > 0
    scale = np.where(live, scale, 1.0)
    Z = (F - mean)[:, live] / scale[live]
    y_mean = Y.mean(axis=0)
    Yc = Y - y_mean
    ridge = Z.shape[0] <= Z.shape[1] or np.linalg.matrix_rank(Z) < Z.shape[1]
    if ridge:
        G = Z.T @ Z
        G[np.diag_indices_from(G)] += RIDGE
        beta = np.linalg.solve(G, Z.T @ Yc)
        log.info("semi-automatic projection: rank-deficient design, using ridge")
    else:
        beta = np.linalg.lstsq(Z, Yc, rcond=None)[0]
    std = np.zeros((Y.shape[1], 1 + F.shape[1]))
    std[:, 0] = y_mean
    std[:, 1:][:, live] = beta.T
    raw = np.zeros_like(std)
    raw[:, 1:] = std[:, 1:] / scale
    raw[:, 0] = y_mean - raw[:, 1:] @ mean
    return ProjectionMatrix(raw, mean, scale, std, ridge)


def subset_weights(subset, kappa: int) -> np.ndarray:
    w = np.zeros(kappa)
    w[list(subset)] = 1.0
    return w


def _posterior(ctx: WeightObjectiveContext, subset) -> np.ndarray:
    return ctx.candidate_thetas[selected_indices(subset_weights(subset, ctx.kappa), ctx)]


def _half_posterior(ctx: WeightObjectiveContext, subset, half: np.ndarray, m: int) -> np.ndarray:
    d = ctx.distances(subset_weights(subset, ctx.kappa))[half]
    return ctx.candidate_thetas[half[select_m_closest(d, m)]]


def _affinity(X, Y, k: int) -> float:
    return estimate_alpha_divergence(X, Y, k, 0.5).value


def subset_select(ctx: WeightObjectiveContext, threshold: float = 0.05,
                  rng: Optional[np.random.Generator] = None, order=None) -> List[int]:
    """Greedy forward selection of summary indices (0-based, sorted).

    Statistics are visited in a random order (or ``order``).  Each is added
    if the posterior selected with it differs from the posterior without it
    by more than ``threshold`` in estimated Hellinger distance; with an empty
    subset the comparison is against the prior sample.  If nothing passes,
    the single statistic with the largest change is returned.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    kappa = ctx.kappa
    if kappa == 1:
        return [0]
    if order is None:
        rng = np.random.default_rng(rng)
        order = rng.permutation(kappa)
    # Posteriors with and without a statistic are drawn from disjoint halves
    # of the pool; drawn from one pool they share most particles, and shared
    # points make the estimator report almost no change.  The change is the
    # drop in estimated affinity relative to the without-posterior on the
    # other half, which removes the estimator's small-sample bias.
    n = ctx.candidate_thetas.shape[0]
    halves = (np.arange(0, n, 2), np.arange(1, n, 2))
    m = min(max(ctx.n_keep // 2, ctx.k + 1), halves[1].size)
    subset: List[int] = []
    current = null = None
    best_i, best_change = int(order[0]), -np.inf
    for i in order:
        i = int(i)
        if not subset:
            candidate = _posterior(ctx, [i])
            change = estimate_hellinger(ctx.prior_samples, candidate, ctx.k).value
        else:
            candidate = _half_posterior(ctx, subset + [i], halves[1], m)
            change = null - _affinity(current, candidate, ctx.k)
        log.debug("subset selection: statistic %d change %.4f", i, change)
        if change > best_change:
            best_i, best_change = i, change
        if change > threshold:
            subset.append(i)
            current = _half_posterior(ctx, subset, halves[0], m)
            null = _affinity(current, _half_posterior(ctx, subset, halves[1], m), ctx.k)
    if not subset:
        subset = [best_i]
    return sorted(subset)
