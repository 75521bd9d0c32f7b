"""Swarm metrics evaluated on recorded states.

``positions`` arrays have shape ``(..., N, m)``: any leading record/replicate
axes, then one row per thread.
"""
import numpy as np


def group_mean(positions):
    return np.asarray(positions, dtype=float).mean(axis=-2)


def cohesion(positions):
    """Mean half squared deviation of the threads from their group mean (V-bar)."""
    X = np.asarray(positions, dtype=float)
    e = X - X.mean(axis=-2, keepdims=True)
    return 0.5 * np.mean(np.sum(e * e, axis=-1), axis=-1)


def distance_to_opt(mean, optimum):
    """Half squared distance between the group mean and the optimum (U)."""
    d = np.asarray(mean, dtype=float) - np.asarray(optimum, dtype=float)
    return 0.5 * np.sum(d * d, axis=-1)


def mean_distance_to_opt(positions, optimum):
    """Average over threads of the half squared distance to the optimum (F-bar).

    Equals ``cohesion + distance_to_opt(group_mean)`` identically.
    """
    d = np.asarray(positions, dtype=float) - np.asarray(optimum, dtype=float)
    return 0.5 * np.mean(np.sum(d * d, axis=-1), axis=-1)
