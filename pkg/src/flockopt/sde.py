"""Continuum limits: Euler-Maruyama paths and Gibbs stationary densities.

The SDE clock ``s`` runs at ``step`` per unit of simulated time (``s = step * t``),
which turns the per-sample recursion into

    dy_i = [-grad f(y_i) + sum_j a_ij g(y_i - y_j)] gamma ds + tau gamma dB_i

with ``gamma = 1/dt_sample`` and ``tau = sigma sqrt(step * dt_sample)``. The
stacked drift is ``-gamma grad H`` for

    H(y) = sum_i f(y_i) + 1/2 sum_ij a_ij J(y_i - y_j),

whose Gibbs density ``exp(-2 H / (tau^2 gamma))`` is stationary.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .config import ExperimentConfig, build
from .engine import DIVERGENCE_LIMIT, Trace, initial_positions, make_trace
from .objectives import Objective
from .potentials import Potential
from .streams import RngStreams
from .topology import Graph


@dataclass(frozen=True)
class SdeSystem:
    """``dy = drift(y, s) ds + scale dB`` on a flat state of length ``dim``.

    ``drift`` accepts any leading batch axes (one per independent path).
    """

    dim: int
    drift: Callable[[np.ndarray, float], np.ndarray]
    scale: float
    gamma: float = 1.0
    tau: float = 0.0
    shape: tuple = ()  # (N, m) for stacked thread systems

    def __post_init__(self):
        if self.scale < 0:
            raise ValueError("diffusion scale must be nonnegative")


def sde_constants(sigma: float, step: float, dt_sample: float, N: int = 1) -> dict:
    """``gamma = 1/dt`` and ``tau = sigma sqrt(step dt / N)`` (``N = 1`` for a single sample)."""
    return {"gamma": 1.0 / dt_sample, "tau": sigma * math.sqrt(step * dt_sample / N)}


def centralized_sde_system(objective: Objective, sigma: float, step: float, dt_sample: float,
                           N: int) -> SdeSystem:
    k = sde_constants(sigma, step, dt_sample, N)
    g, tau = k["gamma"], k["tau"]

    def drift(y, s):
        return -g * objective.gradient(y)

    return SdeSystem(objective.dim, drift, tau * g, g, tau, (1, objective.dim))


def flocking_sde_system(objective: Objective, potential: Potential, graph: Graph,
                        gamma: float, tau: float, coupled: bool = True) -> SdeSystem:
    """Stacked system for ``N`` threads; the state is ``y.reshape(N * m)``."""
    N, m = graph.n, objective.dim
    A = graph.adjacency[:, :, None]

    def drift(y, s):
        Y = y.reshape(y.shape[:-1] + (N, m))
        rate = -objective.gradient(Y)
        if coupled and N > 1:
            diffs = Y[..., :, None, :] - Y[..., None, :, :]
            rate = rate + (potential.g(diffs) * A).sum(axis=-2)
        return gamma * rate.reshape(y.shape)

    return SdeSystem(N * m, drift, tau * gamma, gamma, tau, (N, m))


def hamiltonian(objective: Objective, potential: Potential, graph: Graph, y) -> np.ndarray:
    N, m = graph.n, objective.dim
    Y = np.asarray(y, dtype=float)
    Y = Y.reshape(Y.shape[:-1] + (N, m))
    out = objective.value(Y).sum(axis=-1)
    diffs = Y[..., :, None, :] - Y[..., None, :, :]
    return out + 0.5 * (potential.J(diffs) * graph.adjacency).sum(axis=(-2, -1))


def euler_maruyama(system: SdeSystem, y0, dt: float, T: float, stream: np.random.Generator,
                   record_every: int = 1) -> np.ndarray:
    """Integrate from ``y0`` (shape ``(..., dim)``) over ``[0, T]``.

    Returns records ``(n_records, ..., dim)`` taken every ``record_every``
    steps, starting with ``y0``; the final state is always included.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if T < 0:
        raise ValueError("T must be nonnegative")
    y = np.array(y0, dtype=float)
    n = int(math.floor(T / dt + 1e-9))
    sq = system.scale * math.sqrt(dt)
    out = [y.copy()]
    for k in range(n):
        y = y + system.drift(y, k * dt) * dt + sq * stream.standard_normal(y.shape)
        if (k + 1) % record_every == 0 or k + 1 == n:
            if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > DIVERGENCE_LIMIT:
                raise FloatingPointError(f"SDE path diverged at s={(k + 1) * dt:.6g}")
            out.append(y.copy())
    return np.array(out)


def run_sde(config: ExperimentConfig, replicate: int = 0) -> Trace:
    """Integrate the continuum limit of ``config`` and record it like the engines.

    Uses ``config.sde_substeps`` Euler steps per base sampling interval; the
    returned trace is indexed by simulated time, with sample-and-hold records.
    """
    setup = build(config)
    cfg = setup.config
    streams = RngStreams(cfg.seed)
    sigma = setup.noise.sigma
    if cfg.mode == "centralized":
        step, dt_sample = cfg.gamma_central, cfg.sampling_central.mean
        system = centralized_sde_system(setup.objective, sigma, step, dt_sample, cfg.N)
        y0 = initial_positions(setup, streams, 1, replicate)
    else:
        step, dt_sample = cfg.step, cfg.sampling.mean
        k = sde_constants(sigma, step, dt_sample)
        system = flocking_sde_system(setup.objective, setup.potential, setup.graph, k["gamma"], k["tau"],
                                     coupled=cfg.mode == "flocking")
        y0 = initial_positions(setup, streams, cfg.N, replicate)
    # real-time Euler step and record grid
    h = cfg.sampling.mean / cfg.sde_substeps
    rec_dt = cfg.record_dt
    n_rec = int(math.floor(cfg.horizon / rec_dt + 1e-9)) + 1
    n_steps = int(math.floor(cfg.horizon / h + 1e-9))
    gen = streams.generator(0, "noise", replicate)
    y = y0.reshape(-1)
    ds = step * h
    sq = system.scale * math.sqrt(ds)
    times, states = [], []
    diverged, message = False, ""
    k = 0
    for r in range(n_rec):
        t_r = r * rec_dt
        while k < n_steps and (k + 1) * h <= t_r + 1e-9 * max(h, cfg.horizon):
            y = y + system.drift(y, k * ds) * ds + sq * gen.standard_normal(y.shape)
            k += 1
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > DIVERGENCE_LIMIT:
            diverged, message = True, f"replicate {replicate}: SDE path diverged at t={t_r:.6g}"
            break
        times.append(t_r)
        states.append(y.copy())
    P = system.shape[0]
    return make_trace(times, states, setup.objective, cfg.mode,
                      final_positions=y.reshape(P, cfg.m).copy(), step_counts=np.array([k]),
                      replicate=replicate, events=k, diverged=diverged, message=message,
                      engine="sde", extras={"gamma": system.gamma, "tau": system.tau})


# -- Gibbs densities ----------------------------------------------------------------

_DEFAULT_POINTS = {1: 4001, 2: 401, 3: 101, 4: 41}
MASS_CAPTURE = 0.99


def _simpson_nd(values, axes):
    out = values
    for ax in reversed(axes):
        out = integrate.simpson(out, x=ax, axis=-1)
    return float(out)


@dataclass
class GibbsDensity:
    """Density ``exp(logu) / K`` normalized on the box ``[low, high]``."""

    logu: Callable[[np.ndarray], np.ndarray]
    low: np.ndarray
    high: np.ndarray
    points: int | None = None
    K: float = field(init=False)
    mass_fraction: float = field(init=False)

    def __post_init__(self):
        self.low = np.atleast_1d(np.asarray(self.low, dtype=float))
        self.high = np.atleast_1d(np.asarray(self.high, dtype=float))
        if self.low.shape != self.high.shape or np.any(self.high <= self.low):
            raise ValueError("box must satisfy low < high componentwise")
        d = self.dim
        if d > 4:
            raise ValueError(f"tensor quadrature limited to dimension <= 4, got {d}")
        if self.points is None:
            self.points = _DEFAULT_POINTS[d]
        if self.points % 2 == 0:
            self.points += 1
        center, half = (self.low + self.high) / 2, (self.high - self.low) / 2
        wide_axes, wide_vals, shift = self._grid(center - 2 * half, center + 2 * half, None)
        total = _simpson_nd(np.exp(wide_vals - shift), wide_axes)
        self.axes, vals, _ = self._grid(self.low, self.high, shift)
        inner = _simpson_nd(np.exp(vals - shift), self.axes)
        self.mass_fraction = inner / total
        if not self.mass_fraction >= MASS_CAPTURE:
            raise ValueError(f"box captures only {self.mass_fraction:.4f} of the mass "
                             f"(need >= {MASS_CAPTURE}); enlarge it")
        self.K = inner * math.exp(shift)
        self._log_norm = shift + math.log(inner)
        self.values = np.exp(vals - self._log_norm)

    @property
    def dim(self) -> int:
        return len(self.low)

    def _grid(self, low, high, shift):
        axes = [np.linspace(lo, hi, self.points) for lo, hi in zip(low, high)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        vals = np.asarray(self.logu(mesh), dtype=float)
        if shift is None:
            shift = float(np.max(vals))
        return axes, vals, shift

    def logpdf(self, y):
        return np.asarray(self.logu(np.asarray(y, dtype=float)), dtype=float) - self._log_norm

    def pdf(self, y):
        return np.exp(self.logpdf(y))

    def integral(self) -> float:
        return _simpson_nd(self.values, self.axes)

    def moments(self):
        """Mean vector and covariance matrix by quadrature."""
        mesh = np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)
        w = self.values
        mean = np.array([_simpson_nd(w * mesh[..., i], self.axes) for i in range(self.dim)])
        d = mesh - mean
        cov = np.array([[_simpson_nd(w * d[..., i] * d[..., j], self.axes) for j in range(self.dim)]
                        for i in range(self.dim)])
        return mean, cov

    def cdf_1d(self, x):
        self._require_1d()
        grid = self.axes[0]
        c = integrate.cumulative_simpson(self.values, x=grid, initial=0.0)
        c = np.maximum.accumulate(c / c[-1])
        return np.interp(x, grid, c, left=0.0, right=1.0)

    def sample_1d(self, n: int, stream: np.random.Generator) -> np.ndarray:
        """Inverse-CDF draws (1-D only)."""
        self._require_1d()
        grid = self.axes[0]
        c = self.cdf_1d(grid)
        return np.interp(stream.uniform(size=n), c, grid)

    def table(self) -> str:
        """Two-column CSV ``coordinate,density`` on the quadrature grid (1-D only)."""
        self._require_1d()
        rows = ["y,density"] + [f"{x:.17g},{p:.17g}" for x, p in zip(self.axes[0], self.values)]
        return "\n".join(rows) + "\n"

    def _require_1d(self):
        if self.dim != 1:
            raise ValueError("only available for one-dimensional densities")


def gibbs_joint(objective: Objective, potential: Potential, graph: Graph, tau: float, gamma: float,
                box, points: int | None = None) -> GibbsDensity:
    """Joint stationary density ``exp(-2 H / (tau^2 gamma))`` of the stacked state."""
    temp = tau * tau * gamma
    if not temp > 0:
        raise ValueError("tau^2 gamma must be positive")
    low, high = box
    dim = graph.n * objective.dim
    low, high = np.broadcast_to(low, (dim,)), np.broadcast_to(high, (dim,))
    return GibbsDensity(lambda y: -2.0 * hamiltonian(objective, potential, graph, y) / temp,
                        low, high, points)


def gibbs_mean_marginal(objective: Objective, N: int, sigma: float, step: float, box,
                        points: int | None = None) -> GibbsDensity:
    """Strong-attraction limit of the group-mean law, ``exp(-2 N f / (sigma^2 step))``.

    With ``step`` the centralized step this is also the stationary law of the
    N-sample scheme, so the two schemes share one limit.
    """
    temp = sigma * sigma * step
    if not temp > 0:
        raise ValueError("sigma^2 step must be positive")
    low, high = box
    m = objective.dim
    low, high = np.broadcast_to(low, (m,)), np.broadcast_to(high, (m,))
    return GibbsDensity(lambda y: -2.0 * N * objective.value(y) / temp, low, high, points)


def empirical_vs_gibbs(samples, density: GibbsDensity, bins: int = 50) -> float:
    """Total-variation distance between a histogram of ``samples`` and ``density``.

    Bins split the density's box evenly; samples outside the box form one
    extra cell where the density has no mass. Burn-in must already be
    removed. Warns when there are fewer than ``100 * bins`` samples.
    """
    density._require_1d()
    x = np.asarray(samples, dtype=float).ravel()
    if len(x) < 100 * bins:
        warnings.warn(f"only {len(x)} samples for {bins} bins; the TV estimate is noisy", stacklevel=2)
    edges = np.linspace(density.low[0], density.high[0], bins + 1)
    p = np.diff(density.cdf_1d(edges))
    counts, _ = np.histogram(x, bins=edges)
    q = counts / len(x)
    outside = 1.0 - q.sum()
    return float(0.5 * (np.abs(q - p).sum() + abs(outside)))


def burn_in(path, fraction: float = 0.2):
    """Drop the first ``fraction`` of records along axis 0."""
    path = np.asarray(path)
    return path[int(math.floor(fraction * len(path))):]
