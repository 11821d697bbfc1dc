"""Posterior quality metrics, all computed in log10 parameter space."""

from __future__ import annotations

import numpy as np
from scipy.stats import gaussian_kde

from ..divergence import estimate_hellinger
from ..smc import Population, PriorSpec

__all__ = ["resample", "metric_hellinger_prior_posterior", "averaged_hellinger", "metric_bias",
           "central_interval"]


def _canonical_order(pop: Population) -> np.ndarray:
    keys = np.column_stack([pop.log10_theta, pop.v])
    return np.lexsort(keys.T[::-1])


def resample(pop: Population, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` equally weighted log10 points drawn from the weighted population.

    Particles are put in a canonical order first, so the draw does not depend
    on row order.
    """
    order = _canonical_order(pop)
    v = pop.v[order]
    idx = rng.choice(len(pop), size=n, p=v / v.sum())
    return pop.log10_theta[order][idx]


def metric_hellinger_prior_posterior(pop: Population, prior: PriorSpec, n_ref: int = 1000,
                                     k: int = 4, rng=None, exponent_dim: bool = True) -> float:
    """Estimated Hellinger distance from the prior to the weighted posterior."""
    rng = np.random.default_rng(rng)
    xi = prior.sample(rng, n_ref)
    post = resample(pop, n_ref, rng)
    return estimate_hellinger(xi, post, k, exponent_dim).value


def averaged_hellinger(pop: Population, prior: PriorSpec, n_ref: int = 1000, k: int = 4,
                       rng=None, exponent_dim: bool = True, draws: int = 50):
    """Mean and standard error of the metric over ``draws`` independent
    reference draws.

    A single draw is noisy when the posterior is narrow: only the few prior
    points that land near it carry the estimate.
    """
    rng = np.random.default_rng(rng)
    vals = np.array([metric_hellinger_prior_posterior(pop, prior, n_ref, k, rng, exponent_dim)
                     for _ in range(draws)])
    se = float(vals.std(ddof=1) / np.sqrt(draws)) if draws > 1 else float("nan")
    return float(vals.mean()), se


def _weighted_mean(pop: Population) -> np.ndarray:
    # sort first so the result does not depend on particle row order
    order = _canonical_order(pop)
    return np.sum(pop.v[order, None] * pop.log10_theta[order], axis=0) / pop.v.sum()


def posterior_mode(pop: Population, n: int = 2000, rng=None) -> np.ndarray:
    """Mode of a Silverman-bandwidth Gaussian KDE fitted to resampled particles."""
    rng = np.random.default_rng(rng)
    pts = resample(pop, n, rng)
    if np.allclose(pts, pts[0]):
        return pts[0].copy()
    try:
        kde = gaussian_kde(pts.T, bw_method="silverman")
    except np.linalg.LinAlgError:
        return _weighted_mean(pop)
    uniq = np.unique(pts, axis=0)
    dens = kde(uniq.T)
    return uniq[int(np.argmax(dens))]


def metric_bias(pop: Population, theta_star, rng=None, n: int = 2000):
    """``(mean_bias, mode_bias)``: log10-space distances from the posterior
    mean and mode to ``theta_star``."""
    target = np.log10(np.asarray(theta_star, dtype=float))
    mean_bias = float(np.linalg.norm(_weighted_mean(pop) - target))
    mode_bias = float(np.linalg.norm(posterior_mode(pop, n, rng) - target))
    return mean_bias, mode_bias


def central_interval(pop: Population, dim: int, level: float = 0.9) -> tuple:
    """Weighted central ``level`` interval of one log10 parameter."""
    x = pop.log10_theta[:, dim]
    order = np.argsort(x, kind="stable")
    x, v = x[order], pop.v[order]
    cdf = np.cumsum(v) / v.sum()
    lo_q, hi_q = (1 - level) / 2, 1 - (1 - level) / 2
    lo = x[min(np.searchsorted(cdf, lo_q), x.size - 1)]
    hi = x[min(np.searchsorted(cdf, hi_q), x.size - 1)]
    return float(lo), float(hi)
