"""Run one configured experiment and persist its artifacts.

A run directory holds::

    manifest.json      config, config hash, seeds, versions, per-generation
                       weights, method extras, metrics, file digests
    observed.csv       observed summary vector
    generation_<t>.csv particle_id, theta_1..theta_p, v, distance
    weights.csv        generation, restart, w_1..w_kappa, L
    timings.json       wall-clock per phase (the only nondeterministic file)

Directories are assembled under a temporary name and renamed into place, so
a failed run leaves nothing behind.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import platform
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .. import __version__
from .. import rng as rngmod
from ..adapt import AdaptiveWeights, make_context
from ..baselines import ScaledWeights, semiauto_project, subset_select, subset_weights
from ..smc import (FixedWeights, GenerationPool, Population, Problem, SMCSettings,
                   run_abc_smc, simulate_pool, KernelSpec)
from ..summaries import WeightVector
from .config import ExperimentConfig
from .metrics import averaged_hellinger, central_interval, metric_bias
from .problems import build_problem

__all__ = ["RunResult", "RunArtifacts", "run_method", "run_experiment", "write_artifacts",
           "verify_manifest", "read_generation_csv", "repeat_seed"]

# pilot runs for the semi-automatic and subset methods get their own seed path
_PILOT = 99


@dataclass
class RunResult:
    config: ExperimentConfig
    repeat: int
    seed: int
    problem: Problem
    populations: List[Population]
    weight_rows: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    @property
    def final(self) -> Population:
        return self.populations[-1]


@dataclass
class RunArtifacts:
    directory: Path
    manifest: dict
    result: RunResult


def repeat_seed(root: int, repeat: int) -> int:
    return int(rngmod.seed_sequence(root, 1000 + repeat).generate_state(1)[0])


def settings_for(config: ExperimentConfig, seed: int, **overrides) -> SMCSettings:
    kw = dict(n_sims=config.n_sims, alpha_accept=config.alpha_accept,
              generations=config.generations, proposal_sd=config.proposal_sd, seed=seed)
    kw.update(overrides)
    return SMCSettings(**kw)


def _pilot_pool(problem: Problem, config: ExperimentConfig, seed: int) -> GenerationPool:
    pilot = settings_for(config, seed, generations=1)
    kernel = KernelSpec.isotropic(config.proposal_sd, problem.prior.dim)
    u, S = simulate_pool(problem, pilot, 1, None, kernel)
    return GenerationPool(1, u, S, np.asarray(problem.observed, dtype=float),
                          pilot.n_keep, problem.prior, seed)


def run_method(config: ExperimentConfig, repeat: int = 0, seed: Optional[int] = None,
               problem: Optional[Problem] = None, **settings_overrides) -> RunResult:
    """Run ``config.method`` on one observed dataset; no files are written."""
    seed = repeat_seed(config.seed, repeat) if seed is None else seed
    problem = problem or build_problem(config, repeat)
    settings = settings_for(config, seed, **settings_overrides)
    extras: dict = {}
    t0 = time.perf_counter()
    run_problem = problem
    method = config.method
    pilot_seed = int(rngmod.seed_sequence(seed, _PILOT).generate_state(1)[0])
    if method == "adaptive":
        strategy = AdaptiveWeights(config.optimizer, config.k, config.exponent_dim,
                                   config.resample_posterior)
    elif method == "uniform":
        strategy = FixedWeights(WeightVector.uniform(problem.kappa))
    elif method == "scaled":
        strategy = ScaledWeights()
    elif method == "subset":
        pool = _pilot_pool(problem, config, pilot_seed)
        ctx = make_context(pool, config.k, config.exponent_dim)
        order = rngmod.generator(seed, rngmod.ORDERING).permutation(problem.kappa)
        subset = subset_select(ctx, config.subset_threshold, order=order)
        extras["subset_order"] = [int(i) for i in order]
        extras["subset"] = subset
        strategy = FixedWeights(subset_weights(subset, problem.kappa))
    elif method == "semiauto":
        pilot = run_abc_smc(problem, settings_for(config, pilot_seed, generations=1))[0]
        proj = semiauto_project(pilot.log10_theta, pilot.summaries)
        extras["projection"] = proj.to_dict()
        base_sim = problem.simulate

        def projected(theta, seeds):
            S = base_sim(theta, seeds)
            out = np.full((S.shape[0], proj.dim), np.nan)
            ok = np.all(np.isfinite(S), axis=1)
            out[ok] = proj.project(S[ok])
            return out

        run_problem = Problem(problem.prior, projected,
                              proj.project(problem.observed[None, :])[0], problem.name)
        strategy = FixedWeights(WeightVector.uniform(proj.dim))
    else:
        raise ValueError(f"unknown method {method!r}")
    t_setup = time.perf_counter() - t0
    pops = run_abc_smc(run_problem, settings, strategy)

    rows = []
    if isinstance(strategy, AdaptiveWeights):
        for gen, res in enumerate(strategy.history, start=1):
            for restart, w, val in res.trace:
                rows.append((gen, restart, np.asarray(w), val))
    else:
        for p in pops:
            rows.append((p.generation, 0, p.weights.weights, None))
    timings = {
        "setup": t_setup,
        "simulate": float(sum(p.info["sim_time"] for p in pops)),
        "search": float(sum(p.info["search_time"] for p in pops)),
        "total": time.perf_counter() - t0,
    }
    result = RunResult(config, repeat, seed, run_problem, pops, rows, extras, timings)
    result.metrics = compute_metrics(result.final, problem, config, seed)
    return result


def compute_metrics(pop: Population, problem: Problem, config: ExperimentConfig,
                    seed: int) -> dict:
    g = rngmod.generator(seed, rngmod.METRIC)
    hell, hell_se = averaged_hellinger(pop, problem.prior, config.n_ref, config.k, g,
                                       config.exponent_dim, config.metric_draws)
    mean_bias, mode_bias = metric_bias(pop, config.theta_star, g)
    return {
        "hellinger": hell,
        "hellinger_se": hell_se,
        "mean_bias": mean_bias,
        "mode_bias": mode_bias,
        "posterior_mean_log10": [float(x) for x in np.sum(pop.v[:, None] * pop.log10_theta, 0)],
        "interval90_log10": [list(central_interval(pop, j)) for j in range(pop.log10_theta.shape[1])],
        "space": "log10",
    }


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _versions() -> dict:
    import numba
    import scipy
    return {"abcweight": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


def write_artifacts(result: RunResult, out_dir) -> RunArtifacts:
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=out_dir.parent))
    try:
        files = []
        obs = np.asarray(result.problem.observed, dtype=float)
        _write_csv(tmp / "observed.csv", [f"s_{i + 1}" for i in range(obs.size)],
                   [[_fmt(x) for x in obs]])
        files.append("observed.csv")
        for pop in result.populations:
            p = pop.log10_theta.shape[1]
            theta = pop.theta
            name = f"generation_{pop.generation}.csv"
            _write_csv(tmp / name,
                       ["particle_id"] + [f"theta_{j + 1}" for j in range(p)] + ["v", "distance"],
                       [[i] + [_fmt(x) for x in theta[i]] + [_fmt(pop.v[i]), _fmt(pop.distance[i])]
                        for i in range(len(pop))])
            files.append(name)
        kappa = len(result.weight_rows[0][2]) if result.weight_rows else 0
        _write_csv(tmp / "weights.csv",
                   ["generation", "restart"] + [f"w_{i + 1}" for i in range(kappa)] + ["L"],
                   [[g, r] + [_fmt(x) for x in w] + [_fmt(val)]
                    for g, r, w, val in result.weight_rows])
        files.append("weights.csv")
        (tmp / "timings.json").write_text(json.dumps(result.timings, indent=2, sort_keys=True))

        config = result.config
        manifest = {
            "config": config.to_dict(),
            "config_hash": config.digest(),
            "seeds": {"root": config.seed, "repeat": result.repeat, "run": result.seed},
            "versions": _versions(),
            "generation_weights": [p.weights.weights.tolist() for p in result.populations],
            "extras": result.extras,
            "metrics": result.metrics,
            "files": {name: _sha256(tmp / name) for name in files},
            "unhashed_files": ["timings.json"],
        }
        (tmp / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        if out_dir.exists():
            shutil.rmtree(out_dir)
        os.replace(tmp, out_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return RunArtifacts(out_dir, manifest, result)


def run_experiment(config: ExperimentConfig, out_dir=None, repeat: int = 0) -> RunArtifacts:
    """Generate observed data, run the configured method, compute metrics and
    (when ``out_dir`` is given) write the run directory."""
    result = run_method(config, repeat)
    if out_dir is None:
        return RunArtifacts(None, {}, result)
    return write_artifacts(result, out_dir)


def verify_manifest(run_dir) -> bool:
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    return all(_sha256(run_dir / name) == digest for name, digest in manifest["files"].items())


def read_generation_csv(path):
    """``(theta, v, distance)`` arrays from a particle CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    p = sum(h.startswith("theta_") for h in header)
    return body[:, 1:1 + p], body[:, 1 + p], body[:, 2 + p]
