"""Ensemble statistics, hitting times and closed-form performance bounds.

Conventions: ``V_bar`` is the cohesion of the swarm, ``U`` the half squared
distance of the group mean to the optimum, and ``tau^2 gamma`` the effective
noise temperature, which equals ``sigma^2 * step`` for the per-sample scheme.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .config import ExperimentConfig, build
from .engine import Trace, run
from .metrics import cohesion, distance_to_opt, group_mean, mean_distance_to_opt  # noqa: F401
from .parallel import run_parallel
from .sde import run_sde

LONG_RUN_FRACTION = 0.25


# -- bounds ---------------------------------------------------------------------------

def _positive(name, value):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")


def bound_psi1(eta, a, lam2, b, trL, m, tau, gamma, N):
    """Long-run cohesion bound for objectives with gradients bounded by ``eta``."""
    _positive("a * lambda2", a * lam2)
    al = a * lam2
    q = eta * eta / (4 * al)
    inner = q + b * abs(trL) / (2 * N) + m * tau * tau * gamma * (N - 1) / (2 * N)
    return (math.sqrt(inner) + math.sqrt(q)) ** 2 / (2 * al)


def bound_psi2(b, trL, m, tau, gamma, N, kappa, a, lam2):
    """Long-run cohesion bound for ``kappa``-strongly convex objectives."""
    denom = kappa + a * lam2
    _positive("kappa + a * lambda2", denom)
    return (b * abs(trL) + m * tau * tau * gamma * (N - 1)) / (4 * N * denom)


def bound_phi(m, tau, gamma, kappa, mu, a, lam2, N):
    """Long-run bound on E[U] for strongly convex objectives with ``mu``-Lipschitz gradient."""
    _positive("kappa", kappa)
    _positive("a * lambda2", a * lam2)
    if mu < kappa:
        raise ValueError(f"need mu >= kappa, got mu={mu}, kappa={kappa}")
    return m * tau * tau * gamma / (4 * kappa * N) * (1 + (mu - kappa) * (N - 1) / (a * lam2))


def phi_transient(t, U0, V0, m, tau, gamma, kappa, mu, a, lam2, N, step):
    """Right-hand side of the transient E[U] bound at simulated times ``t``.

    ``U0`` and ``V0`` are the ensemble means of U and V_bar at time 0.
    """
    phi = bound_phi(m, tau, gamma, kappa, mu, a, lam2, N)
    decay = np.exp(-2 * kappa * gamma * step * np.asarray(t, dtype=float))
    return decay * (U0 + (mu - kappa) / (a * lam2) * V0) + phi * (1 - decay)


def centralized_longrun_lower(m, sigma, step, mu, N):
    """Lower bound on the long-run E[G] of the N-sample centralized scheme."""
    _positive("mu", mu)
    return m * sigma * sigma * step / (4 * mu * N)


def independent_longrun_lower(m, tau, gamma, mu):
    """Lower bound on the long-run per-thread E[1/2 |x_i - x*|^2] without coupling."""
    _positive("mu", mu)
    return m * tau * tau * gamma / (4 * mu)


@dataclass
class BoundReport:
    inputs: dict
    psi1: float | None = None
    psi2: float | None = None
    phi: float | None = None
    centralized_lower: float | None = None
    independent_lower: float | None = None
    skipped: dict = field(default_factory=dict)

    def items(self):
        for k in ("psi1", "psi2", "phi", "centralized_lower", "independent_lower"):
            v = getattr(self, k)
            if v is not None:
                yield k, v

    def to_text(self, prefix="") -> str:
        lines = [f"{prefix}input.{k} = {v!r}" for k, v in self.inputs.items()]
        lines += [f"{prefix}{k} = {v!r}" for k, v in self.items()]
        lines += [f"{prefix}{k} = unavailable ({why})" for k, why in self.skipped.items()]
        return "\n".join(lines)


def bound_report(config: ExperimentConfig) -> BoundReport:
    """Evaluate every bound whose assumption constants the objective declares."""
    s = build(config)
    cfg, obj, pot = s.config, s.objective, s.potential
    temp = cfg.sigma ** 2 * cfg.step  # tau^2 gamma
    inputs = {
        "eta": obj.eta, "kappa": obj.kappa, "mu": obj.mu, "a": pot.a, "b": pot.b,
        "lambda2": s.lap.lambda2, "trace_L": s.lap.trace, "m": cfg.m, "N": cfg.N,
        "tau": cfg.sigma * math.sqrt(cfg.step * cfg.sampling.mean),
        "gamma": 1.0 / cfg.sampling.mean, "tau2_gamma": temp,
        "step": cfg.step, "step_central": cfg.gamma_central, "sigma": cfg.sigma,
    }
    rep = BoundReport(inputs)
    tau, gamma = inputs["tau"], inputs["gamma"]
    al = pot.a * s.lap.lambda2
    if obj.eta is None:
        rep.skipped["psi1"] = "eta undeclared"
    elif al <= 0:
        rep.skipped["psi1"] = "a * lambda2 = 0"
    else:
        rep.psi1 = bound_psi1(obj.eta, pot.a, s.lap.lambda2, pot.b, s.lap.trace, cfg.m, tau, gamma, cfg.N)
    if obj.kappa is None:
        rep.skipped["psi2"] = rep.skipped["phi"] = "kappa undeclared"
    else:
        rep.psi2 = bound_psi2(pot.b, s.lap.trace, cfg.m, tau, gamma, cfg.N, obj.kappa, pot.a, s.lap.lambda2)
        if obj.mu is None:
            rep.skipped["phi"] = "mu undeclared"
        elif al <= 0:
            rep.skipped["phi"] = "a * lambda2 = 0"
        else:
            rep.phi = bound_phi(cfg.m, tau, gamma, obj.kappa, obj.mu, pot.a, s.lap.lambda2, cfg.N)
    if obj.mu is None:
        rep.skipped["centralized_lower"] = rep.skipped["independent_lower"] = "mu undeclared"
    else:
        rep.centralized_lower = centralized_longrun_lower(cfg.m, cfg.sigma, cfg.gamma_central, obj.mu, cfg.N)
        rep.independent_lower = independent_longrun_lower(cfg.m, tau, gamma, obj.mu)
    return rep


# -- hitting times --------------------------------------------------------------------

def hitting_time(trace: Trace, center, radius: float):
    """First record time at which the tracked point is strictly inside the ball.

    The tracked point is the group mean (the single iterate for the
    centralized scheme). Returns None if the ball is never entered.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    d = np.linalg.norm(trace.mean - np.asarray(center, dtype=float), axis=-1)
    hit = np.flatnonzero(d < radius)
    return float(trace.times[hit[0]]) if len(hit) else None


def stop_on_hit(center, radius):
    """Stop predicate for ``run`` that ends a replicate once the ball is entered."""
    center = np.asarray(center, dtype=float)

    def stop(t, state):
        return bool(np.linalg.norm(state.mean(axis=0) - center) < radius)

    return stop


def hitting_times(config: ExperimentConfig, radius: float, R: int | None = None, center=None):
    """Hitting times of ``R`` replicates (None where the ball is never entered)."""
    s = build(config)
    center = s.objective.optimum if center is None else center
    if center is None:
        raise ValueError("hitting times need a center or a known optimum")
    R = config.replicates if R is None else R
    out = []
    for r in range(R):
        tr = run(config, r, stop=stop_on_hit(center, radius))
        out.append(hitting_time(tr, center, radius))
    return out


# -- ensembles ------------------------------------------------------------------------

def run_replicate(config: ExperimentConfig, replicate: int) -> Trace:
    if config.engine == "parallel":
        return run_parallel(config, replicate)
    if config.engine == "sde":
        return run_sde(config, replicate)
    return run(config, replicate)


def mean_ci(samples, axis=0, level=0.95):
    """Mean, standard deviation and t-based confidence half-width, ignoring NaN."""
    x = np.asarray(samples, dtype=float)
    n = np.sum(np.isfinite(x), axis=axis)
    mean = np.nanmean(x, axis=axis)
    sd = np.nanstd(x, axis=axis, ddof=1) if np.all(n > 1) else np.full_like(mean, np.nan)
    half = stats.t.ppf(0.5 + level / 2, np.maximum(n - 1, 1)) * sd / np.sqrt(n)
    return mean, sd, half


@dataclass
class LongRun:
    per_replicate: np.ndarray
    mean: float
    se: float

    @property
    def ci(self):
        n = np.sum(np.isfinite(self.per_replicate))
        h = stats.t.ppf(0.975, max(n - 1, 1)) * self.se
        return self.mean - h, self.mean + h


def long_run(values, fraction: float = LONG_RUN_FRACTION) -> LongRun:
    """Per-replicate time averages over the final ``fraction`` of the records.

    ``values`` is ``(R, records)``; the standard error treats replicates as
    independent.
    """
    v = np.asarray(values, dtype=float)
    start = int(math.floor((1 - fraction) * v.shape[1]))
    per = v[:, start:].mean(axis=1)
    ok = per[np.isfinite(per)]
    se = float(ok.std(ddof=1) / math.sqrt(len(ok))) if len(ok) > 1 else math.nan
    return LongRun(per, float(ok.mean()) if len(ok) else math.nan, se)


METRICS = ("U", "V_bar", "f_mean")


@dataclass
class EnsembleStats:
    """Per-record-time statistics of ``R`` replicates.

    ``values[name]`` is ``(R, records)``; rows of diverged or truncated
    replicates are NaN past their last record.
    """

    times: np.ndarray
    values: dict
    traces: list
    diverged: int

    @property
    def R(self) -> int:
        return len(self.traces)

    def mean(self, name):
        return mean_ci(self.values[name])[0]

    def sd(self, name):
        return mean_ci(self.values[name])[1]

    def se(self, name):
        return self.sd(name) / np.sqrt(np.sum(np.isfinite(self.values[name]), axis=0))

    def ci(self, name):
        m, _, h = mean_ci(self.values[name])
        return m - h, m + h

    def long_run(self, name, fraction: float = LONG_RUN_FRACTION) -> LongRun:
        return long_run(self.values[name], fraction)


def collect(traces) -> EnsembleStats:
    traces = list(traces)
    if not traces:
        raise ValueError("need at least one trace")
    times = max((t.times for t in traces), key=len)
    vals = {k: np.full((len(traces), len(times)), np.nan) for k in METRICS}
    for r, tr in enumerate(traces):
        n = len(tr.times)
        vals["U"][r, :n] = tr.u
        vals["V_bar"][r, :n] = tr.vbar
        vals["f_mean"][r, :n] = tr.f_mean
    return EnsembleStats(times, vals, traces, sum(t.diverged for t in traces))


def ensemble(config: ExperimentConfig, R: int | None = None) -> EnsembleStats:
    """Run replicates ``0 .. R-1`` of ``config`` on its engine and aggregate."""
    R = config.replicates if R is None else R
    if R < 2:
        raise ValueError("an ensemble needs R >= 2")
    return collect(run_replicate(config, r) for r in range(R))
