"""ABC-SMC with an injected summary-weight strategy.

Parameters are handled in log10 coordinates throughout: priors are uniform
there, the perturbation kernel is Gaussian there, and importance weights are
densities there.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Protocol

import numpy as np
from scipy.special import logsumexp

from . import rng as rngmod
from .summaries import WeightVector, weighted_sq_distances

__all__ = [
    "PriorSpec",
    "KernelSpec",
    "Population",
    "Problem",
    "SMCSettings",
    "GenerationPool",
    "FixedWeights",
    "accepted_count",
    "sample_prior",
    "perturb",
    "importance_weight",
    "log_importance_weights",
    "select_closest",
    "run_abc_smc",
]

log = logging.getLogger(__name__)

MAX_RETRIES = 10**6


@dataclass(frozen=True)
class PriorSpec:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("prior bounds differ in length")
        if not np.all((lo > 0) & (lo < hi) & np.isfinite(hi)):
            raise ValueError(f"prior intervals need 0 < lo < hi, got {lo}, {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def log_lo(self) -> np.ndarray:
        return np.log10(self.lo)

    @property
    def log_hi(self) -> np.ndarray:
        return np.log10(self.hi)

    def contains(self, u) -> np.ndarray:
        """Support test for log10 coordinates (rows of ``u``)."""
        u = np.atleast_2d(u)
        return np.all((u >= self.log_lo) & (u <= self.log_hi), axis=1)

    def log_density(self, u) -> np.ndarray:
        """Log density in log10 coordinates; ``-inf`` outside the support."""
        u = np.atleast_2d(u)
        value = -np.sum(np.log(self.log_hi - self.log_lo))
        return np.where(self.contains(u), value, -np.inf)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` draws in log10 coordinates."""
        return rng.uniform(self.log_lo, self.log_hi, size=(n, self.dim))


@dataclass(frozen=True)
class KernelSpec:
    sd: np.ndarray

    def __post_init__(self):
        sd = np.atleast_1d(np.asarray(self.sd, dtype=float))
        if not np.all(sd > 0):
            raise ValueError("kernel standard deviations must be positive")
        object.__setattr__(self, "sd", sd)

    @classmethod
    def isotropic(cls, sd: float, dim: int) -> "KernelSpec":
        return cls(np.full(dim, float(sd)))

    def log_density(self, centres, points) -> np.ndarray:
        """``(len(points), len(centres))`` matrix of log K(centre -> point)."""
        centres = np.atleast_2d(centres)
        points = np.atleast_2d(points)
        z = (points[:, None, :] - centres[None, :, :]) / self.sd
        norm = -np.sum(np.log(self.sd)) - 0.5 * self.sd.size * np.log(2 * np.pi)
        return norm - 0.5 * np.sum(z * z, axis=2)


@dataclass
class Population:
    """Accepted particles of one generation.

    ``log10_theta`` rows are parameters, ``v`` the normalized importance
    weights, ``summaries`` and ``distance`` the values that got them accepted.
    ``raw_v`` holds the unnormalized weights (exactly 1 for prior draws, else
    rescaled so the largest is 1).
    """

    generation: int
    log10_theta: np.ndarray
    v: np.ndarray
    summaries: np.ndarray
    distance: np.ndarray
    weights: Optional[WeightVector] = None
    info: dict = field(default_factory=dict)
    raw_v: Optional[np.ndarray] = None

    @property
    def theta(self) -> np.ndarray:
        return 10.0 ** self.log10_theta

    def __len__(self):
        return self.v.size


@dataclass
class Problem:
    """A prior, a batch simulator returning summaries, and observed summaries.

    ``simulate(theta, seeds)`` takes natural-unit parameters ``(N, p)`` and
    returns an ``(N, kappa)`` summary matrix; rows with a failed simulation
    are filled with ``nan``.
    """

    prior: PriorSpec
    simulate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    observed: np.ndarray
    name: str = ""

    @property
    def kappa(self) -> int:
        return int(np.asarray(self.observed).size)


@dataclass
class SMCSettings:
    n_sims: int
    alpha_accept: float
    generations: int = 5
    proposal_sd: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.n_sims < 1:
            raise ValueError("n_sims must be positive")
        if not 0 < self.alpha_accept <= 1:
            raise ValueError("alpha_accept must lie in (0, 1]")
        if accepted_count(self.n_sims, self.alpha_accept) < 1:
            raise ValueError("alpha_accept * n_sims < 1 keeps no particles")
        if self.generations < 1:
            raise ValueError("generations must be positive")

    @property
    def n_keep(self) -> int:
        return accepted_count(self.n_sims, self.alpha_accept)


@dataclass
class GenerationPool:
    """Everything a weight strategy may look at before selection."""

    generation: int
    log10_theta: np.ndarray
    summaries: np.ndarray
    observed: np.ndarray
    n_keep: int
    prior: PriorSpec
    seed: int
    log_v: Optional[np.ndarray] = None


class WeightStrategy(Protocol):
    def __call__(self, pool: GenerationPool) -> WeightVector: ...


class FixedWeights:
    """The same weight vector at every generation."""

    def __init__(self, weights):
        self.weights = weights if isinstance(weights, WeightVector) else WeightVector(weights)

    def __call__(self, pool: GenerationPool) -> WeightVector:
        return self.weights


def accepted_count(n: int, alpha: float) -> int:
    """``floor(alpha * n)``, tolerant of representation error in ``alpha``."""
    return int(np.floor(alpha * n * (1 + 1e-12)))


def sample_prior(prior: PriorSpec, rng: np.random.Generator, n: Optional[int] = None
                 ) -> np.ndarray:
    """Natural-unit draws, log10-uniform on each interval."""
    u = prior.sample(rng, 1 if n is None else n)
    theta = 10.0 ** u
    theta = np.clip(theta, prior.lo, prior.hi)
    return theta[0] if n is None else theta


def perturb(theta, kernel: KernelSpec, rng: np.random.Generator,
            prior: Optional[PriorSpec] = None) -> np.ndarray:
    """Gaussian jitter of ``log10(theta)``; with ``prior`` retries until inside it.

    Works row-wise on a matrix of parameters too.
    """
    theta = np.asarray(theta, dtype=float)
    u = perturb_log(np.log10(np.atleast_2d(theta)), kernel, rng, prior)
    out = 10.0 ** u
    if prior is not None:
        out = np.clip(out, prior.lo, prior.hi)
    return out.reshape(theta.shape)


def perturb_log(u, kernel: KernelSpec, rng: np.random.Generator,
                prior: Optional[PriorSpec] = None) -> np.ndarray:
    u = np.atleast_2d(np.asarray(u, dtype=float))
    out = u + rng.normal(size=u.shape) * kernel.sd
    if prior is None:
        return out
    pending = ~prior.contains(out)
    tries = 0
    while pending.any():
        tries += 1
        if tries > MAX_RETRIES:
            raise RuntimeError("perturbation kernel keeps leaving the prior support")
        idx = np.flatnonzero(pending)
        out[idx] = u[idx] + rng.normal(size=(idx.size, u.shape[1])) * kernel.sd
        pending[idx] = ~prior.contains(out[idx])
    return out


def log_importance_weights(u, prev: Population, kernel: KernelSpec,
                           prior: PriorSpec) -> np.ndarray:
    """Log of ``pi(u) / sum_j v_j K(u_j, u)`` for each row of ``u`` (log10 coordinates)."""
    u = np.atleast_2d(u)
    log_k = kernel.log_density(prev.log10_theta, u)
    with np.errstate(divide="ignore"):
        denom = logsumexp(log_k + np.log(prev.v)[None, :], axis=1)
    if np.any(~np.isfinite(denom)):
        raise FloatingPointError("importance weight denominator underflowed to zero")
    return prior.log_density(u) - denom


def importance_weight(theta, prev: Optional[Population], kernel: KernelSpec,
                      prior: PriorSpec) -> float:
    """Unnormalized importance weight of one natural-unit parameter vector."""
    if prev is None:
        return 1.0
    u = np.log10(np.asarray(theta, dtype=float)).reshape(1, -1)
    lv = log_importance_weights(u, prev, kernel, prior)[0]
    if lv > np.log(np.finfo(float).max):
        # the linear-space denominator is below the smallest representable value
        raise FloatingPointError("importance weight denominator underflowed to zero")
    return float(np.exp(lv))


def select_closest(distances, alpha: float) -> np.ndarray:
    """Sorted indices of the ``floor(alpha N)`` smallest distances.

    Ties at the cut-off go to the smallest indices.
    """
    d = np.asarray(distances, dtype=float)
    m = accepted_count(d.size, alpha)
    if m < 1:
        raise ValueError(f"alpha={alpha} keeps no particles out of {d.size}")
    return select_m_closest(d, m)


def select_m_closest(d: np.ndarray, m: int) -> np.ndarray:
    n = d.size
    if m >= n:
        return np.arange(n)
    thr = np.partition(d, m - 1)[m - 1]
    below = np.flatnonzero(d < thr)
    ties = np.flatnonzero(d == thr)
    if thr != thr:  # nan never compares equal; treat as tie with everything left
        ties = np.flatnonzero(np.isnan(d))
    take = ties[: m - below.size]
    return np.sort(np.concatenate([below, take]))


def _normalize_log(log_v: np.ndarray) -> np.ndarray:
    v = np.exp(log_v - logsumexp(log_v))
    return v / v.sum()


def simulate_pool(problem: Problem, settings: SMCSettings, generation: int,
                  prev: Optional[Population], kernel: KernelSpec):
    """Propose and simulate the ``N`` candidates of one generation.

    Returns ``(log10_theta, summaries)``.
    """
    root = settings.seed
    if prev is None:
        u = problem.prior.sample(rngmod.generator(root, generation, rngmod.PRIOR), settings.n_sims)
    else:
        g = rngmod.generator(root, generation, rngmod.PROPOSAL)
        parents = g.choice(len(prev), size=settings.n_sims, p=prev.v)
        u = perturb_log(prev.log10_theta[parents], kernel, g, problem.prior)
    seeds = rngmod.simulation_seeds(root, settings.n_sims, generation, rngmod.SIMULATION)
    theta = np.clip(10.0 ** u, problem.prior.lo, problem.prior.hi)
    summaries = np.asarray(problem.simulate(theta, seeds), dtype=float)
    return u, summaries


def run_abc_smc(problem: Problem, settings: SMCSettings,
                weight_strategy: Optional[Callable[[GenerationPool], WeightVector]] = None,
                callback: Optional[Callable[[Population], None]] = None) -> List[Population]:
    """ABC-SMC keeping the closest ``floor(alpha N)`` of ``N`` candidates per generation.

    ``weight_strategy`` maps each generation's candidate pool to the weight
    vector used for ranking; the default is uniform weights.
    """
    if weight_strategy is None:
        weight_strategy = FixedWeights(WeightVector.uniform(problem.kappa))
    kernel = KernelSpec.isotropic(settings.proposal_sd, problem.prior.dim)
    populations: List[Population] = []
    prev = None
    for t in range(1, settings.generations + 1):
        t0 = time.perf_counter()
        u, summaries = simulate_pool(problem, settings, t, prev, kernel)
        t_sim = time.perf_counter() - t0
        pool = GenerationPool(t, u, summaries, np.asarray(problem.observed, dtype=float),
                              settings.n_keep, problem.prior, settings.seed)
        if prev is not None and getattr(weight_strategy, "wants_log_v", False):
            pool.log_v = log_importance_weights(u, prev, kernel, problem.prior)
        t1 = time.perf_counter()
        w = weight_strategy(pool)
        t_search = time.perf_counter() - t1
        dist = weighted_sq_distances(w, summaries, pool.observed)
        keep = select_m_closest(dist, settings.n_keep)
        if prev is None:
            raw = np.ones(keep.size)
            v = raw / keep.size
        else:
            lv = (pool.log_v[keep] if pool.log_v is not None
                  else log_importance_weights(u[keep], prev, kernel, problem.prior))
            raw = np.exp(lv - lv.max())
            v = _normalize_log(lv)
        pop = Population(t, u[keep], v, summaries[keep], dist[keep], w,
                         info={"n_sims": settings.n_sims, "sim_time": t_sim,
                               "search_time": t_search,
                               "n_failed": int(np.sum(~np.isfinite(dist)))}, raw_v=raw)
        pop.info.update(getattr(weight_strategy, "last_info", {}) or {})
        log.debug("generation %d: kept %d, median distance %.4g", t, keep.size,
                  np.median(pop.distance))
        populations.append(pop)
        if callback is not None:
            callback(pop)
        prev = pop
    return populations
