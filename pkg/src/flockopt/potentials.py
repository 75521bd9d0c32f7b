"""Attraction/repulsion interaction between threads.

The pairwise force is ``g(x) = -x [a - g_r(|x|)]`` with a constant (linear)
attraction ``a`` and an optional Gaussian repulsion ``g_r(r) = c exp(-r^2)``.
It derives from the scalar potential ``J`` through ``g(x) = -grad J(|x|)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Potential:
    a: float = 0.0
    c: float | None = None  # Gaussian repulsion magnitude; None means no repulsion

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("attraction strength a must be nonnegative")
        if self.c is not None and self.c <= 0:
            raise ValueError("gaussian repulsion magnitude must be positive")

    @property
    def repulsion(self) -> str:
        return "none" if self.c is None else "gaussian"

    def g_r(self, r):
        r = np.asarray(r, dtype=float)
        if self.c is None:
            return np.zeros_like(r)
        return self.c * np.exp(-r * r)

    def g(self, x):
        """Force on a thread at relative offset ``x`` (last axis is the vector)."""
        x = np.asarray(x, dtype=float)
        if self.c is None:
            return -self.a * x
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        return -x * (self.a - self.c * np.exp(-r2))

    def J(self, x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        out = 0.5 * self.a * r2
        if self.c is not None:
            out = out + 0.5 * self.c * np.exp(-r2)
        return out

    def grad_J(self, x):
        return -self.g(x)

    @property
    def b(self) -> float:
        return repulsion_bound(self)

    @property
    def rho(self) -> float | None:
        """Separation where attraction and repulsion balance, if one exists."""
        if self.c is None or self.a <= 0 or self.c <= self.a:
            return None
        return math.sqrt(math.log(self.c / self.a))

    def to_spec(self) -> dict:
        rep = "none" if self.c is None else {"gaussian": self.c}
        return {"a": self.a, "repulsion": rep}


def eval_g(p: Potential, x):
    return p.g(x)


def eval_J(p: Potential, x):
    return p.J(x)


def repulsion_bound(p: Potential) -> float:
    """Uniform bound ``b >= g_r(r) r^2``; ``c r^2 exp(-r^2)`` peaks at ``r^2 = 1``."""
    if p.c is None:
        return 0.0
    return p.c / math.e


def make_potential(spec: dict) -> Potential:
    """Parse ``{"a": <real>, "repulsion": "none" | {"gaussian": <c>}}``."""
    spec = dict(spec)
    a = float(spec.pop("a", 0.0))
    rep = spec.pop("repulsion", "none")
    if spec:
        raise ValueError(f"unknown potential keys: {sorted(spec)}")
    if rep == "none" or rep is None:
        return Potential(a)
    if isinstance(rep, dict) and set(rep) == {"gaussian"}:
        return Potential(a, float(rep["gaussian"]))
    raise ValueError(f"repulsion must be 'none' or {{gaussian = c}}, got {rep!r}")
