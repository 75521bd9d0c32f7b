"""Deterministic discrete-event simulator of the three update schemes.

* flocking: every thread runs single-sample SGD on its own clock, perturbed by
  attraction/repulsion towards the latest published solutions of its
  neighbours;
* independent: the same threads without the coupling term;
* centralized: one iterate stepped with the average of N gradient samples,
  each step taking the (overhead-inflated) centralized sampling time.

Events are completion times held in a heap keyed by ``(time, thread id)``.
Completions that share a timestamp form one group processed in ascending
thread id. By default every member reads the solutions published strictly
before that instant, which is the per-step recursion ``x_i(t + dt)`` written
in terms of ``x_j(t)``; the coupling then cancels exactly in the group mean
whenever the whole swarm ticks together. ``sequential = true`` makes each
member read the latest solutions instead, including those published earlier
at the same instant (a Gauss-Seidel sweep). State is recorded on a
fixed time grid with sample-and-hold semantics (a record at ``t_r`` sees
every completion with time ``<= t_r``).
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import metrics
from .config import ExperimentConfig, Setup, build
from .objectives import Objective
from .potentials import Potential
from .streams import NoiseBank, RngStreams, draw_sampling_time

DIVERGENCE_LIMIT = 1e9


@dataclass
class Trace:
    """Recorded trajectory of one replicate.

    ``positions`` has shape ``(records, P, m)`` where ``P = N`` for the
    threaded schemes and ``P = 1`` for the centralized scheme (its single
    shared iterate).
    """

    times: np.ndarray
    positions: np.ndarray
    mode: str
    optimum: np.ndarray | None
    f_mean: np.ndarray
    final_positions: np.ndarray
    step_counts: np.ndarray
    replicate: int = 0
    events: int = 0
    diverged: bool = False
    message: str = ""
    engine: str = "event"
    time_scale: float | None = None
    extras: dict = field(default_factory=dict)

    @property
    def mean(self) -> np.ndarray:
        return metrics.group_mean(self.positions)

    @property
    def vbar(self) -> np.ndarray:
        return metrics.cohesion(self.positions)

    @property
    def u(self) -> np.ndarray:
        if self.optimum is None:
            return np.full(len(self.times), np.nan)
        return metrics.distance_to_opt(self.mean, self.optimum)

    def thread_distances(self) -> np.ndarray:
        if self.optimum is None:
            return np.full(self.positions.shape[:2], np.nan)
        return np.linalg.norm(self.positions - self.optimum, axis=-1)


def make_trace(times, positions, objective: Objective, mode, **kw) -> Trace:
    times = np.asarray(times, dtype=float)
    positions = np.asarray(positions, dtype=float).reshape(len(times), -1, objective.dim)
    f_mean = objective.value(metrics.group_mean(positions)) if len(times) else np.zeros(0)
    return Trace(times, positions, mode, objective.optimum, np.asarray(f_mean), **kw)


# -- single-step update rules -----------------------------------------------------

def coupling_force(positions, idx, adjacency, potential: Potential):
    """Sum over neighbours j of ``g(x_i - x_j)`` for each thread i in ``idx``."""
    X = np.asarray(positions, dtype=float)
    diffs = X[idx][:, None, :] - X[None, :, :]
    forces = potential.g(diffs) * np.asarray(adjacency)[idx][:, :, None]
    return forces.sum(axis=1)


def flocking_step(positions, idx, adjacency, objective: Objective, potential: Potential,
                  step: float, noise):
    """New solutions of threads ``idx`` given a snapshot of all published solutions."""
    idx = np.atleast_1d(idx)
    Xi = np.asarray(positions, dtype=float)[idx]
    coupling = coupling_force(positions, idx, adjacency, potential)
    return Xi + step * (-objective.gradient(Xi) + noise + coupling)


def independent_step(positions, idx, objective: Objective, step: float, noise):
    idx = np.atleast_1d(idx)
    Xi = np.asarray(positions, dtype=float)[idx]
    return Xi + step * (-objective.gradient(Xi) + noise)


def centralized_step(x, objective: Objective, step: float, samples):
    """One step using the average of the N noise samples (one row per thread)."""
    return x + step * (-objective.gradient(x) + np.mean(samples, axis=0))


def sequential_sweep(X, idx, neighbors, potential: Potential, step: float, drive):
    """Apply coupled updates for ``idx`` one thread at a time, in place.

    ``drive[k]`` is ``-grad f + noise`` for thread ``idx[k]``; it only depends on
    that thread's own position, which no earlier update in the sweep touches.
    """
    for k, i in enumerate(idx):
        nb = neighbors[i]
        coupling = potential.g(X[i] - X[nb]).sum(axis=0) if len(nb) else 0.0
        X[i] = X[i] + step * (drive[k] + coupling)


def synchronous_step(positions, adjacency, objective, potential, step, noise):
    """All threads update at once from the same snapshot."""
    idx = np.arange(len(positions))
    return flocking_step(positions, idx, adjacency, objective, potential, step, noise)


# -- recording --------------------------------------------------------------------

class _StopRun(Exception):
    pass


class _Recorder:
    def __init__(self, dt, horizon, stop=None):
        self.dt = dt
        self.n = int(np.floor(horizon / dt + 1e-9)) + 1
        # accumulated event times drift by ~ulp(horizon) per step
        self.tol = 1e-9 * max(dt, horizon)
        self.times = []
        self.states = []
        self.stop = stop

    def next_time(self):
        return len(self.times) * self.dt

    def advance(self, t_event, state):
        """Record every grid point strictly before ``t_event``."""
        while len(self.times) < self.n and self.next_time() < t_event - self.tol:
            self._record(state)

    def finish(self, state):
        while len(self.times) < self.n:
            self._record(state)

    def _record(self, state):
        t = self.next_time()
        self.times.append(t)
        self.states.append(state.copy())
        if self.stop is not None and self.stop(t, state):
            raise _StopRun


def _check_finite(x, t):
    if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_LIMIT:
        raise FloatingPointError(f"diverged at t={t:.6g}: max |x| = {np.max(np.abs(x)):.3g}")


def initial_positions(setup: Setup, streams: RngStreams, count: int, replicate: int):
    return np.array([streams.generator(i, "init", replicate).uniform(setup.init_low, setup.init_high)
                     for i in range(count)]).reshape(count, setup.config.m)


# -- event loop -------------------------------------------------------------------

StopFn = Callable[[float, np.ndarray], bool]


def run(config: ExperimentConfig, replicate: int = 0, stop: StopFn | None = None) -> Trace:
    """Simulate one replicate up to ``config.horizon`` simulated seconds.

    ``stop(t, state)`` is evaluated after each record; returning true ends the
    run early (the trace is truncated there).
    """
    setup = build(config)
    if config.mode == "centralized":
        return _run_centralized(setup, replicate, stop)
    return _run_threads(setup, replicate, stop)


def _run_threads(setup: Setup, replicate: int, stop) -> Trace:
    cfg = setup.config
    N, T = cfg.N, cfg.horizon
    streams = RngStreams(cfg.seed)
    X = initial_positions(setup, streams, N, replicate)
    bank = NoiseBank([streams.generator(i, "noise", replicate) for i in range(N)], cfg.m)
    timing_gens = [streams.generator(i, "timing", replicate) for i in range(N)]
    timing = cfg.sampling
    A = setup.graph.adjacency
    coupled = cfg.mode == "flocking"
    neighbors = [np.flatnonzero(row) for row in A]
    rec = _Recorder(cfg.record_dt, T, stop)
    steps = np.zeros(N, dtype=np.int64)
    heap = [(draw_sampling_time(timing, timing_gens[i]), i) for i in range(N)]
    heapq.heapify(heap)
    t_end = T + rec.tol
    events, diverged, message = 0, False, ""
    try:
        while heap and heap[0][0] <= t_end:
            t = heap[0][0]
            rec.advance(t, X)
            group = []
            while heap and heap[0][0] == t:
                group.append(heapq.heappop(heap)[1])
            idx = np.array(sorted(group))
            noise = setup.noise.sigma * bank.take(idx)
            if coupled and cfg.sequential:
                new = X.copy()
                drive = -setup.objective.gradient(X[idx]) + noise
                sequential_sweep(new, idx, neighbors, setup.potential, cfg.step, drive)
                new = new[idx]
            elif coupled:
                new = flocking_step(X, idx, A, setup.objective, setup.potential, cfg.step, noise)
            else:
                new = independent_step(X, idx, setup.objective, cfg.step, noise)
            try:
                _check_finite(new, t)
            except FloatingPointError as exc:
                diverged, message = True, f"replicate {replicate}: {exc}"
                break
            X[idx] = new
            steps[idx] += 1
            events += len(idx)
            for i in idx:
                heapq.heappush(heap, (t + draw_sampling_time(timing, timing_gens[i]), int(i)))
        if not diverged:
            rec.finish(X)
    except _StopRun:
        pass
    return make_trace(rec.times, rec.states, setup.objective, cfg.mode,
                      final_positions=X.copy(), step_counts=steps, replicate=replicate,
                      events=events, diverged=diverged, message=message)


def _run_centralized(setup: Setup, replicate: int, stop) -> Trace:
    cfg = setup.config
    N, T = cfg.N, cfg.horizon
    streams = RngStreams(cfg.seed)
    # The shared iterate starts where thread 0 would, so N = 1 matches the
    # independent scheme exactly.
    x = initial_positions(setup, streams, 1, replicate)
    bank = NoiseBank([streams.generator(i, "noise", replicate) for i in range(N)], cfg.m)
    tgen = streams.generator(0, "timing", replicate)
    timing = cfg.sampling_central
    gamma = cfg.gamma_central
    everyone = np.arange(N)
    rec = _Recorder(cfg.record_dt, T, stop)
    t = draw_sampling_time(timing, tgen)
    t_end = T + rec.tol
    steps, diverged, message = 0, False, ""
    try:
        while t <= t_end:
            rec.advance(t, x)
            samples = setup.noise.sigma * bank.take(everyone)
            new = centralized_step(x, setup.objective, gamma, samples)
            try:
                _check_finite(new, t)
            except FloatingPointError as exc:
                diverged, message = True, f"replicate {replicate}: {exc}"
                break
            x = new
            steps += 1
            t = t + draw_sampling_time(timing, tgen)
        if not diverged:
            rec.finish(x)
    except _StopRun:
        pass
    return make_trace(rec.times, rec.states, setup.objective, "centralized",
                      final_positions=x.copy(), step_counts=np.array([steps]),
                      replicate=replicate, events=steps, diverged=diverged, message=message)
