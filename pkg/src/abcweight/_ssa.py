"""Compiled kernels for the direct-method simulator and the toy model."""

import numpy as np
from numba import njit

ZEROTH = 0
UNARY = 1
HOMODIMER = 2

OK = 0
EVENT_CAP = 1


@njit(cache=True)
def _propensities(state, rates, kinds, reactant, rate_index, out):
    total = 0.0
    for j in range(kinds.shape[0]):
        c = rates[rate_index[j]]
        kind = kinds[j]
        if kind == UNARY:
            a = c * state[reactant[j]]
        elif kind == HOMODIMER:
            x = state[reactant[j]]
            a = c * x * (x - 1) * 0.5
        else:
            a = c
        out[j] = a
        total += a
    return total


@njit(cache=True)
def ssa_run(stoich, kinds, reactant, rate_index, rates, initial, times, seed,
            max_events, out):
    """Fill ``out[j, :]`` with the state at ``times[j]``; return a status code."""
    np.random.seed(seed)
    n_species = initial.shape[0]
    state = initial.copy()
    props = np.empty(kinds.shape[0])
    t = 0.0
    j = 0
    n_obs = times.shape[0]
    events = 0
    while j < n_obs:
        total = _propensities(state, rates, kinds, reactant, rate_index, props)
        if total <= 0.0:
            t_next = np.inf
        else:
            t_next = t + np.random.exponential(1.0 / total)
        # record every observation time passed before the next event fires
        while j < n_obs and times[j] < t_next:
            for s in range(n_species):
                out[j, s] = state[s]
            j += 1
        if j >= n_obs:
            break
        events += 1
        if events > max_events:
            return EVENT_CAP
        target = np.random.random() * total
        acc = 0.0
        r = kinds.shape[0] - 1
        for i in range(kinds.shape[0]):
            acc += props[i]
            if target < acc:
                r = i
                break
        # guard against landing on a zero-propensity channel via rounding
        while props[r] <= 0.0 and r > 0:
            r -= 1
        for s in range(n_species):
            state[s] += stoich[r, s]
        t = t_next
    return OK


@njit(cache=True)
def ssa_batch(stoich, kinds, reactant, rate_index, rates, initial, times, seeds,
              max_events, out, status):
    for i in range(seeds.shape[0]):
        status[i] = ssa_run(stoich, kinds, reactant, rate_index, rates[i], initial,
                            times, seeds[i], max_events, out[i])


@njit(cache=True)
def normal_batch(scales, seeds, out):
    for i in range(seeds.shape[0]):
        np.random.seed(seeds[i])
        out[i] = np.random.normal(0.0, 1.0) * scales[i]


@njit(cache=True)
def death_batch(stoich, kinds, reactant, rate_index, rates, initial, times, seeds,
                max_events, out, status, z):
    # z uses the same per-simulation stream, drawn after the jump process
    for i in range(seeds.shape[0]):
        status[i] = ssa_run(stoich, kinds, reactant, rate_index, rates[i, :1], initial,
                            times, seeds[i], max_events, out[i])
        z[i] = np.random.normal(0.0, 1.0) * rates[i, 1]


@njit(cache=True)
def uniform_batch(thetas, r, seeds, out):
    for i in range(seeds.shape[0]):
        np.random.seed(seeds[i])
        for j in range(r):
            out[i, j] = np.random.random() * thetas[i]
