"""Turn an :class:`ExperimentConfig` into a simulator-backed ABC problem."""

from __future__ import annotations

import numpy as np

from .. import models
from .. import rng as rngmod
from ..smc import PriorSpec, Problem
from ..summaries import summarize_batch
from .config import ExperimentConfig

__all__ = ["schedule_for", "simulator_for", "build_problem", "observed_summary"]


def schedule_for(config: ExperimentConfig) -> models.ObservationSchedule:
    if config.spacing == "geometric":
        return models.ObservationSchedule.geometric(config.final_time, config.n)
    return models.ObservationSchedule.linear(config.final_time, config.n)


def simulator_for(config: ExperimentConfig):
    """``simulate(theta, seeds) -> summaries`` for the configured model."""
    cap = config.event_cap
    if config.model == "toy":
        def simulate(theta, seeds):
            draws = models.simulate_toy_batch(np.asarray(theta)[:, 0], config.n, seeds)
            return summarize_batch("toy", draws, toy_sorted=config.toy_sorted)
        return simulate

    schedule = schedule_for(config)
    if config.model == "death":
        def simulate(theta, seeds):
            counts, z, ok = models.simulate_death_batch(theta, schedule, seeds,
                                                        config.initial[0], cap)
            out = summarize_batch("death", counts, z)
            out[~ok] = np.nan
            return out
        return simulate

    if config.model == "dimerization":
        network = models.dimerization_network()
    else:
        network = models.diffusion_network(len(config.initial))
    initial = np.asarray(config.initial, dtype=np.int64)

    def simulate(theta, seeds):
        states, ok = models.ssa_simulate_batch(network, theta, initial, schedule, seeds, cap)
        out = summarize_batch(config.model, states)
        out[~ok] = np.nan
        return out
    return simulate


def observed_summary(config: ExperimentConfig, repeat: int = 0) -> np.ndarray:
    """Summaries of the synthetic observed dataset at ``theta_star``."""
    seed = rngmod.simulation_seeds(config.seed, 1, rngmod.OBSERVED, repeat)
    obs = simulator_for(config)(np.atleast_2d(config.theta_star), seed)[0]
    if not np.all(np.isfinite(obs)):
        raise RuntimeError("observed dataset simulation failed")
    return obs


def build_problem(config: ExperimentConfig, repeat: int = 0) -> Problem:
    prior = PriorSpec(np.array(config.prior_lo), np.array(config.prior_hi))
    return Problem(prior, simulator_for(config), observed_summary(config, repeat),
                   name=config.model)
