"""Per-generation optimization of the ABC distance weights.

At each generation the ``N`` simulated candidates are fixed.  A weight
vector ranks them, the closest ``M`` are kept, and the objective is the
estimated Hellinger distance between ``M`` prior draws and the kept
parameters.  The objective only changes when the kept set changes, so it is
piecewise constant in the weights and is searched with a multi-start
Nelder-Mead over log10-weights rather than anything gradient based.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from . import rng as rngmod
from .divergence import estimate_alpha_divergence
from .smc import (GenerationPool, Problem, SMCSettings, accepted_count,
                  run_abc_smc, select_m_closest)
from .summaries import WeightVector

__all__ = [
    "WeightObjectiveContext",
    "OptimizerConfig",
    "OptimizationResult",
    "AdaptiveWeights",
    "make_context",
    "objective_L",
    "selected_indices",
    "inverse_sd_weights",
    "optimize_weights",
    "run_adaptive_smc",
    "scan_line",
]

log = logging.getLogger(__name__)

LOG10_WEIGHT_MIN = -12.0


class WeightObjectiveContext:
    """Read-only data the weight objective is evaluated against.

    Parameters are in log10 coordinates.  Squared residuals against the
    observed summaries are computed once here.
    """

    def __init__(self, prior_samples, candidate_thetas, candidate_summaries, observed,
                 alpha_accept: float, k: int = 4, exponent_dim: bool = True,
                 candidate_log_v=None, resample: bool = False, resample_offset: float = 0.5):
        self.prior_samples = np.atleast_2d(np.asarray(prior_samples, dtype=float))
        theta = np.asarray(candidate_thetas, dtype=float)
        self.candidate_thetas = theta[:, None] if theta.ndim == 1 else theta
        S = np.asarray(candidate_summaries, dtype=float)
        self.candidate_summaries = S[:, None] if S.ndim == 1 else S
        self.observed = np.atleast_1d(np.asarray(observed, dtype=float))
        self.alpha_accept = float(alpha_accept)
        self.k = int(k)
        self.exponent_dim = exponent_dim
        n = self.candidate_thetas.shape[0]
        self.n_keep = accepted_count(n, self.alpha_accept)
        if self.n_keep < 1:
            raise ValueError("alpha_accept keeps no candidates")
        if self.candidate_summaries.shape != (n, self.observed.size):
            raise ValueError("candidate summaries do not match candidates/observed")
        if self.prior_samples.shape[1] != self.candidate_thetas.shape[1]:
            raise ValueError("prior samples and candidates differ in dimension")
        sq = (self.candidate_summaries - self.observed) ** 2
        self._bad = ~np.all(np.isfinite(sq), axis=1)
        self._sq = np.where(np.isfinite(sq), sq, 0.0)
        self.candidate_log_v = None if candidate_log_v is None else np.asarray(candidate_log_v)
        self.resample = resample and candidate_log_v is not None
        self.resample_offset = resample_offset

    @property
    def kappa(self) -> int:
        return self.observed.size

    def distances(self, w) -> np.ndarray:
        d = self._sq @ w
        d[self._bad] = np.inf
        return d

    def posterior_sample(self, idx: np.ndarray) -> np.ndarray:
        thetas = self.candidate_thetas[idx]
        if not self.resample:
            return thetas
        lv = self.candidate_log_v[idx]
        p = np.exp(lv - lv.max())
        p /= p.sum()
        # systematic resampling with a fixed offset keeps the objective deterministic
        positions = (np.arange(idx.size) + self.resample_offset) / idx.size
        pick = np.minimum(np.searchsorted(np.cumsum(p), positions), idx.size - 1)
        return thetas[pick]


@dataclass
class OptimizerConfig:
    restarts: int = 4
    max_evaluations: int = 300
    initial_simplex_scale: float = 3.0
    weight_floor: float = 0.0

    def __post_init__(self):
        if self.restarts < 0:
            raise ValueError("restarts must be nonnegative")
        if self.weight_floor < 0:
            raise ValueError("weight_floor must be nonnegative")


@dataclass
class OptimizationResult:
    weights: WeightVector
    value: float
    trace: List[Tuple[int, np.ndarray, float]] = field(default_factory=list)
    evaluations: int = 0


def _as_array(w) -> np.ndarray:
    return np.asarray(w.weights if isinstance(w, WeightVector) else w, dtype=float)


def selected_indices(w, ctx: WeightObjectiveContext) -> np.ndarray:
    """Indices of the ``M`` candidates closest to the observed data under ``w``."""
    w = _as_array(w)
    if w.shape != (ctx.kappa,):
        raise ValueError(f"expected {ctx.kappa} weights, got shape {w.shape}")
    if np.any(w < 0) or not w.sum() > 0:
        raise ValueError("weights must be nonnegative with a positive entry")
    return select_m_closest(ctx.distances(w / w.sum()), ctx.n_keep)


def objective_L(w, ctx: WeightObjectiveContext) -> float:
    """``1 - D_{1/2}(prior || kept candidates)``, unclamped."""
    idx = selected_indices(w, ctx)
    est = estimate_alpha_divergence(ctx.prior_samples, ctx.posterior_sample(idx), ctx.k,
                                    0.5, ctx.exponent_dim)
    return 1.0 - est.value


def inverse_sd_weights(summaries) -> np.ndarray:
    """Normalized ``1/sd`` per column; zero-variance columns get weight 0."""
    S = np.asarray(summaries, dtype=float)
    S = S[np.all(np.isfinite(S), axis=1)]
    if S.shape[0] < 2:
        raise ValueError("need at least two finite rows to estimate standard deviations")
    sd = S.std(axis=0, ddof=1)
    w = np.zeros_like(sd)
    nz = sd > 0
    if not nz.any():
        raise ValueError("every summary column has zero variance")
    w[nz] = 1.0 / sd[nz]
    return w / w.sum()


def _to_weights(u: np.ndarray, floor: float) -> np.ndarray:
    w = 10.0 ** (u - u.max())
    w /= w.sum()
    if floor > 0:
        w = np.maximum(w, floor)
        w /= w.sum()
    return w


def _to_log(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    w = w / w.max()
    with np.errstate(divide="ignore"):
        u = np.log10(w)
    return np.maximum(u, LOG10_WEIGHT_MIN)


def optimize_weights(ctx: WeightObjectiveContext, opt: OptimizerConfig,
                     rng: np.random.Generator, previous=None) -> OptimizationResult:
    """Multi-start Nelder-Mead maximization of :func:`objective_L`.

    Starts, in order: uniform weights, inverse-standard-deviation weights,
    ``previous`` (if given), then Dirichlet draws.  The search runs over
    log10-weights bounded to ``[-12, 0]`` (relative to the largest weight).
    Returns the best vector found; ties keep the earliest start.
    """
    kappa = ctx.kappa
    uniform = np.full(kappa, 1.0 / kappa)
    if opt.restarts == 0 or kappa == 1:
        value = objective_L(uniform, ctx)
        return OptimizationResult(WeightVector(uniform), value, [(0, uniform, value)], 1)

    starts = [uniform]
    try:
        starts.append(inverse_sd_weights(ctx.candidate_summaries))
    except ValueError:
        pass
    if previous is not None:
        starts.append(_as_array(previous))
    while len(starts) < opt.restarts:
        starts.append(rng.dirichlet(np.ones(kappa)))
    starts = starts[: opt.restarts]

    bounds = [(LOG10_WEIGHT_MIN, 0.0)] * kappa
    best_w, best_val = None, -np.inf
    trace = []
    total_evals = 0
    for r, w0 in enumerate(starts):
        state = {"w": None, "val": -np.inf, "n": 0}

        def neg_L(u):
            w = _to_weights(np.asarray(u), opt.weight_floor)
            val = objective_L(w, ctx)
            state["n"] += 1
            if val > state["val"]:
                state["w"], state["val"] = w, val
            return -val

        u0 = _to_log(w0)
        simplex = np.tile(u0, (kappa + 1, 1))
        for i in range(kappa):
            step = opt.initial_simplex_scale
            simplex[i + 1, i] += step if u0[i] + step <= 0.0 else -step
        try:
            minimize(neg_L, u0, method="Nelder-Mead", bounds=bounds,
                     options={"maxfev": max(1, opt.max_evaluations), "initial_simplex": simplex,
                              "xatol": 1e-6, "fatol": 0.0})
        except Exception as exc:  # a failed restart must not sink the generation
            log.warning("weight search restart %d failed: %s", r, exc)
        total_evals += state["n"]
        if state["w"] is None:
            continue
        trace.append((r, state["w"], state["val"]))
        if state["val"] > best_val:
            best_w, best_val = state["w"], state["val"]
    if best_w is None:
        best_val = objective_L(uniform, ctx)
        best_w = uniform
    return OptimizationResult(WeightVector(best_w), best_val, trace, total_evals)


def make_context(pool: GenerationPool, k: int = 4, exponent_dim: bool = True,
                 resample: bool = False) -> WeightObjectiveContext:
    """Objective context for one generation, with fresh prior reference draws."""
    g = rngmod.generator(pool.seed, pool.generation, rngmod.REFERENCE)
    xi = pool.prior.sample(g, pool.n_keep)
    alpha = pool.n_keep / pool.log10_theta.shape[0]
    ctx = WeightObjectiveContext(xi, pool.log10_theta, pool.summaries, pool.observed, alpha, k,
                                 exponent_dim, candidate_log_v=pool.log_v, resample=resample)
    # alpha derived from M can round down by one; pin the count explicitly
    ctx.n_keep = pool.n_keep
    return ctx


class AdaptiveWeights:
    """Weight strategy that optimizes the weights afresh at every generation."""

    def __init__(self, opt: Optional[OptimizerConfig] = None, k: int = 4,
                 exponent_dim: bool = True, resample: bool = False):
        self.opt = opt or OptimizerConfig()
        self.k = k
        self.exponent_dim = exponent_dim
        self.resample = resample
        self.previous = None
        self.history: List[OptimizationResult] = []
        self.last_info: dict = {}

    @property
    def wants_log_v(self) -> bool:
        return self.resample

    def __call__(self, pool: GenerationPool) -> WeightVector:
        ctx = make_context(pool, self.k, self.exponent_dim, self.resample)
        g = rngmod.generator(pool.seed, pool.generation, rngmod.OPTIMIZER)
        result = optimize_weights(ctx, self.opt, g, self.previous)
        self.previous = result.weights
        self.history.append(result)
        self.last_info = {"objective": result.value, "evaluations": result.evaluations}
        return result.weights


def run_adaptive_smc(problem: Problem, settings: SMCSettings,
                     opt: Optional[OptimizerConfig] = None, k: int = 4,
                     exponent_dim: bool = True, resample: bool = False):
    """ABC-SMC with the weights re-optimized at each generation.

    Returns ``(populations, strategy)``; ``strategy.history`` holds the
    per-generation optimization results.
    """
    strategy = AdaptiveWeights(opt, k, exponent_dim, resample)
    pops = run_abc_smc(problem, settings, strategy)
    return pops, strategy


def scan_line(w_star, ctx: WeightObjectiveContext, radius: float, n_points: int,
              rng: np.random.Generator):
    """Objective along ``w* + r * eta`` for ``n_points`` values of ``r`` in ``[-radius, radius]``.

    ``eta`` is a standard Gaussian direction, so ``radius=1e-4`` traces
    ``w* + 1e-4 r' eta`` for ``r'`` in ``[-1, 1]``.  Returns ``(r, L)`` arrays
    with ``L`` set to nan where some weight went negative.
    """
    w_star = _as_array(w_star)
    eta = rng.standard_normal(w_star.size)
    r = np.linspace(-radius, radius, n_points)
    L = np.full(n_points, np.nan)
    for i, ri in enumerate(r):
        w = w_star + ri * eta
        if np.any(w < 0) or not w.sum() > 0:
            continue
        L[i] = objective_L(w, ctx)
    return r, L
