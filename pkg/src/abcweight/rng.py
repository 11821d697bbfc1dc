"""Seed derivation.

Every random stream in an experiment is addressed by the root seed plus a
path of integers (generation, role, ...).  Per-simulation seeds are the
``i``-th word of the stream for that path, so results do not depend on the
order in which simulations are executed.
"""

from __future__ import annotations

import numpy as np

# stream roles
OBSERVED = 0
PRIOR = 1
PROPOSAL = 2
SIMULATION = 3
REFERENCE = 4
OPTIMIZER = 5
METRIC = 6
ORDERING = 7


def seed_sequence(root: int, *path: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(root), spawn_key=tuple(int(p) for p in path))


def generator(root: int, *path: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(root, *path)))


def simulation_seeds(root: int, n: int, *path: int) -> np.ndarray:
    """``n`` independent 32-bit seeds for the compiled simulators."""
    return seed_sequence(root, *path).generate_state(n, dtype=np.uint32).astype(np.int64)
