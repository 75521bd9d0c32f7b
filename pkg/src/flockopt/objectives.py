"""Test objectives with analytic gradients and declared regularity constants.

All value/gradient callables act on the last axis, so a batch of points with
shape ``(..., m)`` is evaluated in one call.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True, eq=False)
class Objective:
    """A differentiable ``f: R^m -> R``.

    ``eta`` bounds the gradient norm, ``kappa`` is the strong-convexity
    modulus and ``mu`` the gradient Lipschitz constant. Any of them may be
    ``None`` when the function does not satisfy the corresponding property;
    the bound calculators refuse to use undeclared constants.
    """

    name: str
    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    eta: float | None = None
    kappa: float | None = None
    mu: float | None = None
    optimum: np.ndarray | None = None
    box: tuple[float, float] = (-10.0, 10.0)
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.value(x)


def lognorm_objective(m: int = 2) -> Objective:
    """``f(x) = ln(|x|^2 + 1)``; bounded gradient (eta = 1), not strongly convex."""
    if m < 1:
        raise ValueError("m must be >= 1")

    def value(x):
        x = np.asarray(x, dtype=float)
        return np.log1p(np.sum(x * x, axis=-1))

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * x / (np.sum(x * x, axis=-1, keepdims=True) + 1.0)

    # |grad| = 2r/(r^2+1) peaks at r = 1; the Hessian's largest eigenvalue is 2 at 0.
    return Objective("lognorm", m, value, gradient, eta=1.0, mu=2.0,
                     optimum=np.zeros(m), box=(-20.0, 20.0), params={"m": m})


def quadratic_objective(m: int = 2, kappa: float = 1.0, center=None) -> Objective:
    """``f(x) = kappa/2 |x - center|^2``, so kappa = mu."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    c = np.zeros(m) if center is None else np.asarray(center, dtype=float).reshape(m)

    def value(x):
        d = np.asarray(x, dtype=float) - c
        return 0.5 * kappa * np.sum(d * d, axis=-1)

    def gradient(x):
        return kappa * (np.asarray(x, dtype=float) - c)

    return Objective("quadratic", m, value, gradient, kappa=kappa, mu=kappa,
                     optimum=c.copy(), box=(-10.0, 10.0),
                     params={"m": m, "kappa": kappa, "center": c.tolist()})


def ackley_objective() -> Objective:
    """Two-dimensional Ackley function, global minimum 0 at the origin.

    The radial term is not differentiable at the origin; the gradient there is
    taken to be zero.
    """

    def value(x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(0.5 * np.sum(x * x, axis=-1))
        cos_mean = 0.5 * np.sum(np.cos(2 * np.pi * x), axis=-1)
        return -20.0 * np.exp(-0.2 * r) - np.exp(cos_mean) + np.e + 20.0

    def gradient(x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(0.5 * np.sum(x * x, axis=-1, keepdims=True))
        safe_r = np.where(r > 0, r, 1.0)
        radial = np.where(r > 0, 2.0 * x * np.exp(-0.2 * r) / safe_r, 0.0)
        cos_mean = 0.5 * np.sum(np.cos(2 * np.pi * x), axis=-1, keepdims=True)
        periodic = np.pi * np.sin(2 * np.pi * x) * np.exp(cos_mean)
        return radial + periodic

    return Objective("ackley", 2, value, gradient, optimum=np.zeros(2),
                     box=(-15.0, 15.0))


def double_well_objective(m: int = 1) -> Objective:
    """``f(y) = (|y|^2 - 1)^2``: symmetric, non-convex, two wells at |y| = 1."""

    def value(x):
        x = np.asarray(x, dtype=float)
        return (np.sum(x * x, axis=-1) - 1.0) ** 2

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return 4.0 * x * (np.sum(x * x, axis=-1, keepdims=True) - 1.0)

    return Objective("double_well", m, value, gradient, box=(-2.5, 2.5),
                     params={"m": m})


def make_objective(spec: dict, m: int | None = None) -> Objective:
    """Build an objective from a config table such as ``{"name": "quadratic", "kappa": 2}``."""
    spec = dict(spec)
    name = spec.pop("name")
    m = m or spec.pop("m", None)
    unknown = set(spec) - OBJECTIVE_PARAMS.get(name, set())
    if name not in OBJECTIVE_PARAMS:
        raise ValueError(f"unknown objective {name!r}")
    if unknown:
        raise ValueError(f"unknown parameters for objective {name!r}: {sorted(unknown)}")
    if name == "lognorm":
        return lognorm_objective(m or 2)
    if name == "quadratic":
        return quadratic_objective(m or 2, spec.get("kappa", 1.0), spec.get("center"))
    if name == "ackley":
        if m not in (None, 2):
            raise ValueError("ackley is two-dimensional")
        return ackley_objective()
    return double_well_objective(m or 1)


OBJECTIVE_PARAMS = {
    "lognorm": set(),
    "quadratic": {"kappa", "center"},
    "ackley": set(),
    "double_well": set(),
}


def gradient_check(obj: Objective, points, h: float = 1e-5) -> float:
    """Worst component-wise relative error of the analytic gradient vs central differences.

    Errors are scaled by ``max(|analytic|, |numeric|, 1)`` so components that
    vanish are compared absolutely.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    P = np.atleast_2d(np.asarray(points, dtype=float))
    worst = 0.0
    eye = np.eye(obj.dim)
    for x in P:
        with np.errstate(invalid="ignore", over="ignore"):
            g = np.asarray(obj.gradient(x), dtype=float)
            fd = np.array([(obj.value(x + h * e) - obj.value(x - h * e)) / (2 * h) for e in eye])
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(fd))):
            raise FloatingPointError(f"non-finite gradient at {x}")
        scale = np.maximum(np.maximum(np.abs(g), np.abs(fd)), 1.0)
        worst = max(worst, float(np.max(np.abs(g - fd) / scale)))
    return worst
