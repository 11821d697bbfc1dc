"""Summary statistics and the weighted Euclidean ABC distance."""

from __future__ import annotations

import numpy as np

from .models import Trajectory

__all__ = [
    "MODELS",
    "WeightVector",
    "summarize",
    "summarize_batch",
    "weighted_sq_distance",
    "weighted_sq_distances",
]

MODELS = ("toy", "death", "dimerization", "diffusion")


class WeightVector:
    """Nonnegative summary weights, stored normalized to sum to one."""

    __slots__ = ("weights",)

    def __init__(self, weights):
        w = np.array(weights, dtype=float).ravel()
        if w.size < 1:
            raise ValueError("weight vector is empty")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        total = w.sum()
        if not total > 0:
            raise ValueError("at least one weight must be positive")
        self.weights = w / total
        self.weights.flags.writeable = False

    @classmethod
    def uniform(cls, kappa: int) -> "WeightVector":
        return cls(np.ones(kappa))

    def __len__(self):
        return self.weights.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)

    def __eq__(self, other):
        return isinstance(other, WeightVector) and np.array_equal(self.weights, other.weights)

    def __repr__(self):
        return f"WeightVector({np.array2string(self.weights, precision=4)})"


def summarize(model_id: str, trajectory, toy_sorted: bool = True) -> np.ndarray:
    """Map one simulated dataset to its summary vector.

    For the toy model ``trajectory`` is the vector of draws; with
    ``toy_sorted`` the summaries are the order statistics so the last entry
    is the sample maximum.
    """
    if model_id == "toy":
        x = np.asarray(trajectory.states if isinstance(trajectory, Trajectory) else trajectory,
                       dtype=float).ravel()
        return np.sort(x) if toy_sorted else x.copy()
    if not isinstance(trajectory, Trajectory):
        raise TypeError(f"{model_id} summaries need a Trajectory")
    states = np.asarray(trajectory.states, dtype=float)
    if states.ndim != 2:
        raise ValueError("trajectory states must be (observations, species)")
    if model_id == "death":
        if states.shape[1] != 1 or trajectory.aux is None:
            raise ValueError("death trajectory needs one species and a z observation")
        return np.append(states[:, 0], trajectory.aux)
    if model_id == "dimerization":
        if states.shape[1] != 3:
            raise ValueError("dimerization trajectory needs three species")
        return states.T.ravel()
    if model_id == "diffusion":
        return states.T.ravel()
    raise ValueError(f"unknown model {model_id!r}")


def summarize_batch(model_id: str, states, aux=None, toy_sorted: bool = True) -> np.ndarray:
    """Vectorized :func:`summarize` over ``N`` datasets.

    ``states`` is ``(N, r)`` for the toy model and ``(N, n_obs, species)`` or
    ``(N, n_obs)`` otherwise; ``aux`` holds the death-process ``z`` values.
    """
    states = np.asarray(states, dtype=float)
    if model_id == "toy":
        return np.sort(states, axis=1) if toy_sorted else states.copy()
    if states.ndim == 2:
        states = states[:, :, None]
    per_species = states.transpose(0, 2, 1).reshape(states.shape[0], -1)
    if model_id == "death":
        if aux is None:
            raise ValueError("death summaries need z")
        return np.column_stack([per_species, np.asarray(aux, dtype=float)])
    if model_id in ("dimerization", "diffusion"):
        return per_species
    raise ValueError(f"unknown model {model_id!r}")


def weighted_sq_distance(w, a, b) -> float:
    """``sum_i w_i (a_i - b_i)^2``."""
    w = np.asarray(w.weights if isinstance(w, WeightVector) else w, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (w.shape == a.shape == b.shape):
        raise ValueError(f"length mismatch: {w.shape}, {a.shape}, {b.shape}")
    return float(np.dot(w, (a - b) ** 2))


def weighted_sq_distances(w, summaries, observed) -> np.ndarray:
    """Distances of every row of ``summaries`` to ``observed``.

    Rows containing non-finite summaries (failed simulations) get ``inf``.
    """
    w = np.asarray(w.weights if isinstance(w, WeightVector) else w, dtype=float)
    S = np.asarray(summaries, dtype=float)
    sq = (S - np.asarray(observed, dtype=float)) ** 2
    return squared_residual_distances(w, sq)


def squared_residual_distances(w, sq_residuals) -> np.ndarray:
    """Distances from a precomputed matrix of squared residuals."""
    if sq_residuals.shape[1] != w.shape[0]:
        raise ValueError("weight length does not match summary length")
    bad = ~np.all(np.isfinite(sq_residuals), axis=1)
    if bad.any():
        sq_residuals = np.where(np.isfinite(sq_residuals), sq_residuals, 0.0)
    d = sq_residuals @ w
    d[bad] = np.inf
    return d
