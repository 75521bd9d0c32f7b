"""Reproducible randomness: gradient noise, sampling times and per-thread streams.

Every (replicate, thread, purpose) triple owns an independent Philox stream
keyed off the master seed, so a thread's draws never depend on how events
from different threads interleave.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PURPOSES = {"noise": 0, "timing": 1, "init": 2}
SAMPLING_KINDS = ("constant", "exponential", "lognormal")


@dataclass(frozen=True)
class NoiseModel:
    sigma: float
    kind: str = "gaussian_iid"

    def __post_init__(self):
        if self.kind != "gaussian_iid":
            raise ValueError(f"unsupported noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


@dataclass(frozen=True)
class SamplingTimeModel:
    """I.i.d. positive durations with a given mean.

    ``dispersion`` is the log-scale standard deviation for the lognormal
    family and is ignored otherwise.
    """

    kind: str = "constant"
    mean: float = 0.01
    dispersion: float = 0.5

    def __post_init__(self):
        if self.kind not in SAMPLING_KINDS:
            raise ValueError(f"unknown sampling-time kind {self.kind!r}")
        if not self.mean > 0:
            raise ValueError("sampling-time mean must be positive")
        if self.dispersion < 0:
            raise ValueError("dispersion must be nonnegative")


class RngStreams:
    """Factory of independent generators indexed by (replicate, thread, purpose)."""

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed) & ((1 << 64) - 1)

    def generator(self, thread: int, purpose: str, replicate: int = 0) -> np.random.Generator:
        key = (int(replicate), int(thread), PURPOSES[purpose])
        ss = np.random.SeedSequence(self.master_seed, spawn_key=key)
        return np.random.Generator(np.random.Philox(ss))


def draw_noise(nm: NoiseModel, m: int, stream: np.random.Generator) -> np.ndarray:
    if m < 1:
        raise ValueError("m must be >= 1")
    return nm.sigma * stream.standard_normal(m)


def draw_sampling_time(stm: SamplingTimeModel, stream: np.random.Generator) -> float:
    if stm.kind == "constant":
        return stm.mean
    if stm.kind == "exponential":
        return float(stream.exponential(stm.mean))
    s = stm.dispersion
    return float(stream.lognormal(math.log(stm.mean) - 0.5 * s * s, s))


def overhead_sampling_time(base: SamplingTimeModel, N: int, beta: float) -> SamplingTimeModel:
    """Per-step duration of the N-sample centralized scheme, ``N^(1/beta)`` times the base mean."""
    if not beta > 1:
        raise ValueError(f"overhead exponent beta must exceed 1, got {beta}")
    return SamplingTimeModel(base.kind, base.mean * N ** (1.0 / beta), base.dispersion)


class NoiseBank:
    """Buffered standard-normal draws, one private stream per thread.

    ``take(idx)`` returns one ``m``-vector per requested thread. Buffering only
    regroups each thread's draws, so results are independent of the order in
    which threads ask.
    """

    def __init__(self, generators, m: int, chunk: int = 512):
        self.gens = list(generators)
        self.m = m
        self.chunk = chunk
        self.buf = np.empty((len(self.gens), chunk, m))
        self.pos = np.zeros(len(self.gens), dtype=np.int64)
        for i in range(len(self.gens)):
            self._refill(i)

    def _refill(self, i):
        self.buf[i] = self.gens[i].standard_normal((self.chunk, self.m))
        self.pos[i] = 0

    def take(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        out = self.buf[idx, self.pos[idx]]
        self.pos[idx] += 1
        for i in idx[self.pos[idx] >= self.chunk]:
            self._refill(i)
        return out
