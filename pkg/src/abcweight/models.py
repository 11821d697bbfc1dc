"""Generative models: the uniform toy model and three Markov jump processes.

Jump processes are simulated exactly with Gillespie's direct method.  Paths
are piecewise constant; the state reported at an observation time is the
state after the last event at or before that time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _ssa

__all__ = [
    "SimulationError",
    "ReactionNetwork",
    "ObservationSchedule",
    "Trajectory",
    "death_network",
    "dimerization_network",
    "diffusion_network",
    "diffusion_initial_state",
    "ssa_simulate",
    "ssa_simulate_batch",
    "simulate_toy",
    "simulate_toy_batch",
    "simulate_death",
    "simulate_death_batch",
    "simulate_dimerization",
    "simulate_diffusion",
    "DEFAULT_EVENT_CAP",
]

DEFAULT_EVENT_CAP = 10**8

_KINDS = {"zeroth": _ssa.ZEROTH, "unary": _ssa.UNARY, "binary_homodimer": _ssa.HOMODIMER}


class SimulationError(RuntimeError):
    """A realization exceeded the event cap."""


@dataclass(frozen=True)
class Reaction:
    change: tuple
    kind: str
    rate_index: int
    reactant: int = 0


@dataclass(frozen=True)
class ReactionNetwork:
    species_count: int
    reactions: tuple
    rate_count: int

    def __post_init__(self):
        for r in self.reactions:
            if len(r.change) != self.species_count:
                raise ValueError("stoichiometry change has wrong length")
            if r.kind not in _KINDS:
                raise ValueError(f"unknown propensity kind {r.kind!r}")
            if not 0 <= r.rate_index < self.rate_count:
                raise ValueError("rate index out of range")

    def arrays(self):
        stoich = np.array([r.change for r in self.reactions], dtype=np.int64)
        stoich = stoich.reshape(len(self.reactions), self.species_count)
        kinds = np.array([_KINDS[r.kind] for r in self.reactions], dtype=np.int64)
        reactant = np.array([r.reactant for r in self.reactions], dtype=np.int64)
        rate_index = np.array([r.rate_index for r in self.reactions], dtype=np.int64)
        return stoich, kinds, reactant, rate_index

    def propensities(self, state, rates) -> np.ndarray:
        stoich, kinds, reactant, rate_index = self.arrays()
        out = np.empty(len(self.reactions))
        _ssa._propensities(np.asarray(state, dtype=np.int64), np.asarray(rates, dtype=float),
                           kinds, reactant, rate_index, out)
        return out


@dataclass(frozen=True)
class ObservationSchedule:
    times: np.ndarray
    spacing: str = "linear"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", t)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("schedule needs at least one time")
        if t[0] < 0 or np.any(np.diff(t) < 0):
            raise ValueError("observation times must be nonnegative and nondecreasing")
        if self.spacing == "geometric" and np.any(np.diff(t[1:]) <= 0):
            raise ValueError("geometric times must be strictly increasing")

    @classmethod
    def linear(cls, final_time: float, n: int) -> "ObservationSchedule":
        """``n`` equal intervals on ``[0, final_time]`` (``n + 1`` times)."""
        return cls(np.linspace(0.0, final_time, n + 1), "linear")

    @classmethod
    def geometric(cls, final_time: float, n: int, first: Optional[float] = None
                  ) -> "ObservationSchedule":
        """``t_0 = 0`` and ``t_j = T g^(n-j)`` with ``t_1 = first`` (default ``T/1000``)."""
        if n < 1:
            raise ValueError("n must be positive")
        first = final_time / 1000.0 if first is None else first
        if n == 1:
            return cls(np.array([0.0, final_time]), "geometric")
        g = (first / final_time) ** (1.0 / (n - 1))
        j = np.arange(1, n + 1)
        times = np.concatenate([[0.0], final_time * g ** (n - j)])
        times[-1] = final_time
        return cls(times, "geometric")

    def __len__(self):
        return self.times.size


@dataclass
class Trajectory:
    states: np.ndarray
    times: np.ndarray
    aux: Optional[float] = None


def death_network() -> ReactionNetwork:
    """``A -> 0`` at rate ``k A``."""
    return ReactionNetwork(1, (Reaction((-1,), "unary", 0, 0),), 1)


def dimerization_network() -> ReactionNetwork:
    """S1 -> 0, S2 -> S3, S1 + S1 -> S2, S2 -> S1 + S1 with rates k1..k4."""
    return ReactionNetwork(3, (
        Reaction((-1, 0, 0), "unary", 0, 0),
        Reaction((0, -1, 1), "unary", 1, 1),
        Reaction((-2, 1, 0), "binary_homodimer", 2, 0),
        Reaction((2, -1, 0), "unary", 3, 1),
    ), 4)


def diffusion_network(m: int) -> ReactionNetwork:
    """Nearest-neighbour jumps between ``m`` voxels with reflecting ends."""
    if m < 2:
        raise ValueError("need at least two voxels")
    reactions = []
    for i in range(m - 1):
        right = [0] * m
        right[i], right[i + 1] = -1, 1
        left = [0] * m
        left[i + 1], left[i] = -1, 1
        reactions.append(Reaction(tuple(right), "unary", 0, i))
        reactions.append(Reaction(tuple(left), "unary", 0, i + 1))
    return ReactionNetwork(m, tuple(reactions), 1)


def diffusion_initial_state(m: int, per_voxel: int = 10) -> np.ndarray:
    if m % 2:
        raise ValueError("m must be even")
    state = np.zeros(m, dtype=np.int64)
    state[: m // 2] = per_voxel
    return state


def _check_inputs(rates, initial):
    rates = np.asarray(rates, dtype=float)
    initial = np.asarray(initial, dtype=np.int64)
    if np.any(~np.isfinite(rates)) or np.any(rates < 0):
        raise ValueError("rates must be finite and nonnegative")
    if np.any(initial < 0):
        raise ValueError("initial state must be nonnegative")
    return rates, initial


def ssa_simulate_batch(network: ReactionNetwork, rates, initial_state,
                       schedule: ObservationSchedule, seeds,
                       max_events: int = DEFAULT_EVENT_CAP):
    """Simulate one path per row of ``rates``.

    Returns ``(states, ok)`` with ``states`` of shape ``(N, n_obs, species)``
    and ``ok`` false where the event cap was hit.
    """
    rates = np.atleast_2d(np.asarray(rates, dtype=float))
    rates, initial = _check_inputs(rates, initial_state)
    seeds = np.asarray(seeds, dtype=np.int64)
    if rates.shape[0] != seeds.shape[0]:
        raise ValueError("one seed per rate vector required")
    stoich, kinds, reactant, rate_index = network.arrays()
    out = np.zeros((seeds.size, len(schedule), network.species_count), dtype=np.int64)
    status = np.zeros(seeds.size, dtype=np.int64)
    _ssa.ssa_batch(stoich, kinds, reactant, rate_index, rates, initial, schedule.times,
                   seeds, int(max_events), out, status)
    return out, status == _ssa.OK


def ssa_simulate(network: ReactionNetwork, rates, initial_state,
                 schedule: ObservationSchedule, rng_seed: int,
                 max_events: int = DEFAULT_EVENT_CAP) -> Trajectory:
    """One exact direct-method realization observed on ``schedule``."""
    states, ok = ssa_simulate_batch(network, [rates], initial_state, schedule,
                                    [rng_seed], max_events)
    if not ok[0]:
        raise SimulationError(f"event cap of {max_events} exceeded")
    return Trajectory(states[0], schedule.times.copy())


def simulate_toy_batch(thetas, r: int, seeds) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    if np.any(thetas <= 0):
        raise ValueError("theta must be positive")
    if r < 1:
        raise ValueError("r must be at least 1")
    seeds = np.asarray(seeds, dtype=np.int64)
    out = np.empty((seeds.size, int(r)))
    _ssa.uniform_batch(thetas, int(r), seeds, out)
    return out


def simulate_toy(theta: float, r: int, rng_seed: int) -> np.ndarray:
    """``r`` independent draws from ``Unif[0, theta]``."""
    return simulate_toy_batch([theta], r, [rng_seed])[0]


def simulate_death_batch(thetas, schedule: ObservationSchedule, seeds,
                         initial: int = 10, max_events: int = DEFAULT_EVENT_CAP):
    """Death-process counts plus the independent Gaussian channel.

    ``thetas`` rows are ``(k, sigma)``.  Returns ``(counts, z, ok)`` with
    ``counts`` of shape ``(N, n_obs)``.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    _check_inputs(thetas, [initial])
    seeds = np.asarray(seeds, dtype=np.int64)
    stoich, kinds, reactant, rate_index = death_network().arrays()
    out = np.zeros((seeds.size, len(schedule), 1), dtype=np.int64)
    status = np.zeros(seeds.size, dtype=np.int64)
    z = np.zeros(seeds.size)
    _ssa.death_batch(stoich, kinds, reactant, rate_index, thetas,
                     np.array([initial], dtype=np.int64), schedule.times, seeds,
                     int(max_events), out, status, z)
    return out[:, :, 0], z, status == _ssa.OK


def simulate_death(k: float, sigma: float, schedule: ObservationSchedule, rng_seed: int,
                   initial: int = 10, max_events: int = DEFAULT_EVENT_CAP) -> Trajectory:
    counts, z, ok = simulate_death_batch([[k, sigma]], schedule, [rng_seed], initial,
                                         max_events)
    if not ok[0]:
        raise SimulationError(f"event cap of {max_events} exceeded")
    return Trajectory(counts[0][:, None], schedule.times.copy(), float(z[0]))


def simulate_dimerization(rates: Sequence[float], schedule: ObservationSchedule,
                          rng_seed: int, initial=(100_000, 0, 0),
                          max_events: int = DEFAULT_EVENT_CAP) -> Trajectory:
    return ssa_simulate(dimerization_network(), rates, initial, schedule, rng_seed,
                        max_events)


def simulate_diffusion(theta: float, m: int, schedule: ObservationSchedule,
                       rng_seed: int, max_events: int = DEFAULT_EVENT_CAP) -> Trajectory:
    return ssa_simulate(diffusion_network(m), [theta], diffusion_initial_state(m),
                        schedule, rng_seed, max_events)
