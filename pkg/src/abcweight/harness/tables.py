"""Comparison protocols behind the ``table1`` and ``table2`` commands
(equal-compute, and single-generation rejection) plus the weight
consistency study."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..adapt import AdaptiveWeights
from ..smc import accepted_count, run_abc_smc
from .config import ExperimentConfig, preset
from .problems import build_problem
from .runner import repeat_seed, run_method, settings_for

__all__ = ["TableRow", "equal_compute_n2", "table1_cell", "table2_cell", "reproduce_table",
           "ConsistencyResult", "consistency_study", "TABLE_PROBLEMS", "REFERENCE_VALUES"]

log = logging.getLogger(__name__)

TABLE_PROBLEMS = ("toy", "death", "dimerization", "diffusion")

# column order of the table outputs
TABLE1_METHODS = ("uniform_N1", "uniform_N2", "adaptive")
TABLE2_METHODS = ("adaptive", "subset", "semiauto")

# Full-scale reference values, (hellinger, bias) per method in column order.
# The death-process subset entry 0.0896 is kept verbatim although it is out of
# line with its neighbours; it is a reference only, never a pass/fail target.
REFERENCE_VALUES = {
    1: {
        "toy": ((0.792, 0.783, 0.803), (0.047, 0.047, 0.032)),
        "death": ((0.838, 0.825, 0.853), (0.136, 0.114, 0.260)),
        "dimerization": ((0.923, 0.923, 0.937), (0.125, 0.243, 0.057)),
        "diffusion": ((0.723, 0.730, 0.771), (0.486, 0.491, 0.130)),
    },
    2: {
        "toy": ((0.800, 0.793, 0.790), (0.045, 0.051, 0.048)),
        "death": ((0.914, 0.0896, 0.844), (1.078, 1.304, 2.641)),
        "dimerization": ((0.877, 0.858, 0.876), (1.645, 1.229, 0.715)),
        "diffusion": ((0.737, 0.673, 0.721), (0.451, 0.511, 0.275)),
    },
}


@dataclass
class TableRow:
    problem: str
    replicate: int
    method: str
    hellinger: float
    mean_bias: float
    mode_bias: float
    n_sims: int
    alpha_accept: float
    error: Optional[str] = None

    def as_list(self):
        return [self.problem, self.replicate, self.method, self.hellinger, self.mean_bias,
                self.mode_bias, self.n_sims, self.alpha_accept, self.error or ""]


HEADER = ["problem", "replicate", "method", "hellinger", "mean_bias", "mode_bias",
          "n_sims", "alpha_accept", "error"]


def equal_compute_n2(n1: int, sim_time: float, search_time: float) -> int:
    """Simulation count whose extra simulations cost as much as the weight search."""
    if sim_time <= 0:
        return n1
    return n1 + int(math.ceil(n1 * search_time / sim_time))


def _row(problem, rep, method, result, n, alpha) -> TableRow:
    m = result.metrics
    return TableRow(problem, rep, method, m["hellinger"], m["mean_bias"], m["mode_bias"], n, alpha)


def table1_cell(config: ExperimentConfig, replicate: int) -> List[TableRow]:
    """Uniform at (N1, a1), uniform at (N2, a2) and adaptive at (N1, a1).

    ``N2`` is set from the adaptive run's measured search and simulation
    times; ``a2 = floor(a1 N1) / N2`` keeps the particle count equal.
    """
    problem = build_problem(config, replicate)
    seed = repeat_seed(config.seed, replicate)
    n1, a1 = config.n_sims, config.alpha_accept
    adaptive = run_method(config.replace(method="adaptive"), replicate, seed, problem)
    n2 = equal_compute_n2(n1, adaptive.timings["simulate"], adaptive.timings["search"])
    m = accepted_count(n1, a1)
    a2 = m / n2
    uni1 = run_method(config.replace(method="uniform"), replicate, seed, problem)
    uni2 = run_method(config.replace(method="uniform", n_sims=n2, alpha_accept=a2),
                      replicate, seed, problem)
    assert len(uni2.final) == len(adaptive.final)
    return [_row(problem.name, replicate, "uniform_N1", uni1, n1, a1),
            _row(problem.name, replicate, "uniform_N2", uni2, n2, a2),
            _row(problem.name, replicate, "adaptive", adaptive, n1, a1)]


def table2_cell(config: ExperimentConfig, replicate: int) -> List[TableRow]:
    """Single-generation rejection ABC for the adaptive, subset and semi-automatic methods."""
    cfg = config.replace(generations=1)
    problem = build_problem(cfg, replicate)
    seed = repeat_seed(cfg.seed, replicate)
    rows = []
    for method in TABLE2_METHODS:
        res = run_method(cfg.replace(method=method), replicate, seed, problem)
        rows.append(_row(problem.name, replicate, method, res, cfg.n_sims, cfg.alpha_accept))
    return rows


def reproduce_table(table_id: int, scale: str = "desk", seed: int = 0,
                    problems: Sequence[str] = TABLE_PROBLEMS,
                    replicates: Optional[int] = None, overrides: Optional[dict] = None
                    ) -> List[TableRow]:
    """Run the equal-compute (1) or rejection-only (2) protocol over ``problems``.

    ``replicates`` defaults to each preset's ``repeats``.  A failing cell is
    reported as a row with ``error`` set rather than aborting the table.
    """
    if table_id not in (1, 2):
        raise ValueError("table_id must be 1 or 2")
    if scale not in ("desk", "full"):
        raise ValueError("scale must be desk or full")
    cell = table1_cell if table_id == 1 else table2_cell
    methods = TABLE1_METHODS if table_id == 1 else TABLE2_METHODS
    rows: List[TableRow] = []
    for name in problems:
        cfg = preset(f"{name}_desk" if scale == "desk" else name, seed=seed,
                     **(overrides or {}))
        for rep in range(replicates or cfg.repeats):
            try:
                rows.extend(cell(cfg, rep))
            except Exception as exc:  # per-cell failures are reported, not fatal
                log.exception("table %d cell %s/%d failed", table_id, name, rep)
                rows.extend(TableRow(name, rep, m, math.nan, math.nan, math.nan,
                                     cfg.n_sims, cfg.alpha_accept, repr(exc)) for m in methods)
    return rows


def summarize_table(rows: List[TableRow]) -> Dict[str, Dict[str, dict]]:
    """Mean metrics per problem and method."""
    out: Dict[str, Dict[str, dict]] = {}
    for r in rows:
        cell = out.setdefault(r.problem, {}).setdefault(r.method, {"hellinger": [], "mean_bias": [],
                                                                    "mode_bias": []})
        cell["hellinger"].append(r.hellinger)
        cell["mean_bias"].append(r.mean_bias)
        cell["mode_bias"].append(r.mode_bias)
    return {p: {m: {k: float(np.nanmean(v)) if v else math.nan for k, v in d.items()}
                for m, d in methods.items()} for p, methods in out.items()}


@dataclass
class ConsistencyResult:
    weights: np.ndarray          # runs x kappa
    mean: np.ndarray             # per-statistic mean over runs
    centered: np.ndarray         # runs x kappa, each run's mean weight subtracted
    seeds: List[int] = field(default_factory=list)

    @property
    def centered_mean(self) -> np.ndarray:
        return self.centered.mean(axis=0)


def consistency_study(config: ExperimentConfig, runs: int,
                      seeds: Optional[Sequence[int]] = None,
                      generation: int = -1) -> ConsistencyResult:
    """Run the adaptive method ``runs`` times on one observed dataset.

    Returns the weights chosen at ``generation`` (default: the last) in each
    run, their mean, and the traces with each run's own mean subtracted.
    """
    if runs < 2:
        raise ValueError("runs must be at least 2")
    seeds = list(seeds) if seeds is not None else [repeat_seed(config.seed, 10_000 + i)
                                                   for i in range(runs)]
    if len(seeds) != runs:
        raise ValueError("need one seed per run")
    problem = build_problem(config, 0)
    W = []
    for s in seeds:
        strategy = AdaptiveWeights(config.optimizer, config.k, config.exponent_dim,
                                   config.resample_posterior)
        run_abc_smc(problem, settings_for(config, s), strategy)
        W.append(strategy.history[generation].weights.weights)
    W = np.array(W)
    centered = W - W.mean(axis=1, keepdims=True)
    return ConsistencyResult(W, W.mean(axis=0), centered, seeds)
