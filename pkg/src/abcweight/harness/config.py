"""Experiment configuration: a flat TOML document plus an ``[optimizer]`` table.

Keys (all others are rejected):

    model            "toy" | "death" | "dimerization" | "diffusion"
    n                observation intervals (toy: number of draws r)
    final_time       last observation time (ignored by the toy model)
    initial          initial copy numbers (death: [A0]; diffusion: per-voxel)
    theta_star       parameters used to generate the observed dataset
    n_sims           candidates simulated per generation (N)
    alpha_accept     fraction of candidates kept (M = floor(alpha_accept N))
    repeats          independent observed-dataset/inference repetitions
    proposal_sd      perturbation kernel s.d. in log10 units
    prior_lo/hi      log10-uniform prior intervals, natural units
    generations      ABC-SMC generations
    method           adaptive | uniform | scaled | semiauto | subset
    k                neighbour order of the divergence estimator
    exponent_dim     raise kNN distances to the dimension in the estimator
    spacing          linear | geometric observation grid
    event_cap        maximum SSA events per realization
    toy_sorted       sort toy draws into order statistics
    resample_posterior  resample kept particles by importance weight before
                     estimating the objective
    subset_threshold Hellinger change needed to keep a statistic (subset)
    n_ref            reference sample size for the Hellinger metric
    metric_draws     independent reference draws averaged in the Hellinger metric
    seed             root seed

    [optimizer] restarts, max_evaluations, initial_simplex_scale, weight_floor
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import List

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..adapt import OptimizerConfig
from ..models import DEFAULT_EVENT_CAP
from ..smc import accepted_count

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "save_config", "preset",
           "PRESETS", "METHODS"]

METHODS = ("adaptive", "uniform", "scaled", "semiauto", "subset")
MODELS = ("toy", "death", "dimerization", "diffusion")
PRESETS = ("toy", "toy_desk", "toy_main_text", "death", "death_desk", "death_main_text",
           "dimerization", "dimerization_desk", "diffusion", "diffusion_desk")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ExperimentConfig:
    model: str
    n: int
    theta_star: List[float]
    n_sims: int
    alpha_accept: float
    prior_lo: List[float]
    prior_hi: List[float]
    final_time: float = 0.0
    initial: List[int] = field(default_factory=list)
    repeats: int = 1
    proposal_sd: float = 0.25
    generations: int = 5
    method: str = "adaptive"
    k: int = 4
    exponent_dim: bool = True
    spacing: str = "linear"
    event_cap: int = DEFAULT_EVENT_CAP
    toy_sorted: bool = True
    resample_posterior: bool = False
    subset_threshold: float = 0.05
    n_ref: int = 1000
    metric_draws: int = 50
    seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.model not in MODELS:
            raise ConfigError("model", f"must be one of {MODELS}")
        if self.method not in METHODS:
            raise ConfigError("method", f"must be one of {METHODS}")
        if self.n < 1:
            raise ConfigError("n", "must be positive")
        if self.n_sims < 1:
            raise ConfigError("n_sims", "must be positive")
        if not 0 < self.alpha_accept <= 1:
            raise ConfigError("alpha_accept", "must lie in (0, 1]")
        if accepted_count(self.n_sims, self.alpha_accept) < 1:
            raise ConfigError("alpha_accept", "floor(alpha_accept * n_sims) is zero")
        if len(self.prior_lo) != len(self.prior_hi) or not self.prior_lo:
            raise ConfigError("prior_lo", "prior_lo and prior_hi must have equal nonzero length")
        for lo, hi in zip(self.prior_lo, self.prior_hi):
            if not 0 < lo < hi:
                raise ConfigError("prior_lo", f"invalid interval [{lo}, {hi}]")
        if len(self.theta_star) != len(self.prior_lo):
            raise ConfigError("theta_star", "length must match the prior dimension")
        expected_dim = {"toy": 1, "death": 2, "dimerization": 4, "diffusion": 1}[self.model]
        if len(self.theta_star) != expected_dim:
            raise ConfigError("theta_star", f"{self.model} has {expected_dim} parameter(s)")
        if self.model != "toy" and self.final_time <= 0:
            raise ConfigError("final_time", "must be positive")
        if self.model == "death" and len(self.initial) != 1:
            raise ConfigError("initial", "death process needs [A0]")
        if self.model == "dimerization" and len(self.initial) != 3:
            raise ConfigError("initial", "dimerization needs three species")
        if self.model == "diffusion" and (len(self.initial) < 2 or len(self.initial) % 2):
            raise ConfigError("initial", "diffusion needs an even number of voxels")
        if any(int(x) != x or x < 0 for x in self.initial):
            raise ConfigError("initial", "copy numbers must be nonnegative integers")
        if self.repeats < 1:
            raise ConfigError("repeats", "must be positive")
        if self.proposal_sd <= 0:
            raise ConfigError("proposal_sd", "must be positive")
        if self.generations < 1:
            raise ConfigError("generations", "must be positive")
        if self.k < 2:
            raise ConfigError("k", "must be at least 2")
        if accepted_count(self.n_sims, self.alpha_accept) < self.k + 1:
            raise ConfigError("k", "kept particle count must exceed k")
        if self.spacing not in ("linear", "geometric"):
            raise ConfigError("spacing", "must be linear or geometric")
        if self.event_cap < 1:
            raise ConfigError("event_cap", "must be positive")
        if not 0 < self.subset_threshold < 1:
            raise ConfigError("subset_threshold", "must lie in (0, 1)")
        if self.n_ref <= self.k:
            raise ConfigError("n_ref", "must exceed k")
        if self.metric_draws < 1:
            raise ConfigError("metric_draws", "must be positive")

    @property
    def n_keep(self) -> int:
        return accepted_count(self.n_sims, self.alpha_accept)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["optimizer"] = dataclasses.asdict(self.optimizer)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def replace(self, **changes) -> "ExperimentConfig":
        return from_dict({**self.to_dict(), **changes})


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_OPT_FIELDS = {f.name for f in dataclasses.fields(OptimizerConfig)}
_INT_FIELDS = {"n", "n_sims", "repeats", "generations", "k", "event_cap", "n_ref", "metric_draws",
               "seed"}
_FLOAT_LISTS = {"theta_star", "prior_lo", "prior_hi"}


def from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    unknown = set(data) - set(_FIELDS)
    if unknown:
        name = sorted(unknown)[0]
        raise ConfigError(name, "unknown key")
    missing = [name for name, f in _FIELDS.items()
               if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
               and name not in data]
    if missing:
        raise ConfigError(missing[0], "missing required key")
    opt = data.pop("optimizer", None) or {}
    if isinstance(opt, OptimizerConfig):
        opt = dataclasses.asdict(opt)
    bad = set(opt) - _OPT_FIELDS
    if bad:
        raise ConfigError(f"optimizer.{sorted(bad)[0]}", "unknown key")
    try:
        for name in _INT_FIELDS & set(data):
            if isinstance(data[name], bool) or int(data[name]) != data[name]:
                raise ConfigError(name, "must be an integer")
            data[name] = int(data[name])
        for name in _FLOAT_LISTS & set(data):
            data[name] = [float(x) for x in data[name]]
        if "initial" in data:
            data["initial"] = [int(x) if int(x) == x else x for x in data["initial"]]
        for name in ("alpha_accept", "proposal_sd", "final_time", "subset_threshold"):
            if name in data:
                data[name] = float(data[name])
        optimizer = OptimizerConfig(**opt)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("config", str(exc)) from exc
    return ExperimentConfig(optimizer=optimizer, **data)


def load_config(path) -> ExperimentConfig:
    """Read and validate a TOML experiment configuration."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from exc
    return from_dict(data)


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(dumps_config(config))


def dumps_config(config: ExperimentConfig) -> str:
    return tomli_w.dumps(config.to_dict())


def preset(name: str, **overrides) -> ExperimentConfig:
    """A shipped configuration, optionally with fields replaced."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("abcweight.presets").joinpath(f"{name}.toml").read_text()
    data = tomllib.loads(text)
    data.update(overrides)
    return from_dict(data)
