"""Multithreaded asynchronous runtime for the flocking and independent schemes.

Each worker is a real OS thread that sleeps through its drawn sampling times
(compressed by ``time_scale``), reads its neighbours' latest published
solutions from a shared board, steps, and publishes. Nothing waits on anyone
else: the board is a per-slot seqlock over two buffers, so readers retry
instead of blocking a writer and never see a half-written vector.

Runs are statistically, not bitwise, equivalent to the discrete-event engine:
the interleaving of reads and writes depends on the OS scheduler.
"""
from __future__ import annotations

import threading
import time

import numpy as np

from .config import ExperimentConfig, build
from .engine import DIVERGENCE_LIMIT, Trace, flocking_step, independent_step, initial_positions, make_trace
from .streams import NoiseBank, RngStreams, draw_sampling_time


class SharedBoard:
    """One published ``(solution, counter)`` slot per worker.

    Slot ``j`` is written only by worker ``j``. Publication ``k`` goes into
    buffer ``k % 2`` and bumps the slot's sequence number to ``2k`` (odd while
    writing). A reader copies the buffer of the last complete publication and
    accepts the copy if the writer has not since started overwriting that
    same buffer.
    """

    def __init__(self, initial):
        X = np.array(initial, dtype=float)
        self.n, self.m = X.shape
        self._buf = np.empty((self.n, 2, self.m))
        self._buf[:, 0] = X
        self._count = np.zeros((self.n, 2), dtype=np.int64)
        self._seq = [0] * self.n
        self.retries = 0

    def publish(self, j: int, x, counter: int):
        s = self._seq[j]
        k = s // 2 + 1
        self._seq[j] = s + 1
        b = k % 2
        self._buf[j, b] = x
        self._count[j, b] = counter
        self._seq[j] = s + 2

    def read(self, j: int):
        while True:
            s1 = self._seq[j]
            k = s1 // 2
            b = k % 2
            x = self._buf[j, b].copy()
            c = int(self._count[j, b])
            # publication k + 2 is the next one to reuse buffer b; it starts
            # by setting seq to 2k + 3
            if self._seq[j] < 2 * k + 3:
                return x, c
            self.retries += 1

    def read_all(self):
        xs, cs = zip(*(self.read(j) for j in range(self.n)))
        return np.array(xs), np.array(cs)


def snapshot_read(board: SharedBoard, j: int):
    return board.read(j)


class WorkerError(RuntimeError):
    pass


def run_parallel(config: ExperimentConfig, replicate: int = 0, time_scale: float | None = None) -> Trace:
    """Run one replicate with ``N`` worker threads plus a sampler thread.

    Simulated time advances ``time_scale`` times faster than the wall clock
    (default: ``config.time_scale``). Workers that fall behind schedule skip
    their sleeps, so every worker still performs exactly the updates whose
    completion times fall inside the horizon.
    """
    if config.mode not in ("flocking", "independent"):
        raise ValueError("the parallel engine runs flocking or independent threads only")
    scale = float(time_scale if time_scale is not None else config.time_scale)
    setup = build(config)
    cfg = setup.config
    N, T = cfg.N, cfg.horizon
    streams = RngStreams(cfg.seed)
    X0 = initial_positions(setup, streams, N, replicate)
    board = SharedBoard(X0)
    A = setup.graph.adjacency
    coupled = cfg.mode == "flocking"
    sigma = setup.noise.sigma
    timing = cfg.sampling
    dt_rec = cfg.record_dt
    n_rec = int(np.floor(T / dt_rec + 1e-9)) + 1
    abort = threading.Event()
    errors: list[str] = []
    diverged: list[str] = []
    lateness = np.zeros(N)
    steps = np.zeros(N, dtype=np.int64)

    def sleep_until(t_sim, start):
        delay = start + t_sim / scale - time.perf_counter()
        if delay > 0:
            time.sleep(delay)
        return -delay

    def worker(i, start):
        try:
            bank = NoiseBank([streams.generator(i, "noise", replicate)], cfg.m)
            tgen = streams.generator(i, "timing", replicate)
            nbrs = np.flatnonzero(A[i])
            local = np.zeros((N, cfg.m))
            local[i] = X0[i]
            own = np.array([i])
            k = 0
            t = draw_sampling_time(timing, tgen)
            while t <= T * (1 + 1e-12) and not abort.is_set():
                lateness[i] = max(lateness[i], sleep_until(t, start))
                noise = sigma * bank.take([0])
                if coupled:
                    for j in nbrs:
                        local[j] = board.read(j)[0]
                    new = flocking_step(local, own, A, setup.objective, setup.potential, cfg.step, noise)[0]
                else:
                    new = independent_step(local, own, setup.objective, cfg.step, noise)[0]
                if not np.all(np.isfinite(new)) or np.max(np.abs(new)) > DIVERGENCE_LIMIT:
                    diverged.append(f"replicate {replicate}: thread {i} diverged at t={t:.6g}")
                    abort.set()
                    return
                k += 1
                local[i] = new
                board.publish(i, new, k)
                steps[i] = k
                t = t + draw_sampling_time(timing, tgen)
        except Exception as exc:  # surfaced to the caller below
            errors.append(f"worker {i} failed after {steps[i]} steps: {type(exc).__name__}: {exc}")
            abort.set()

    records, rec_times = [], []

    def sampler(start):
        for r in range(n_rec):
            t_r = r * dt_rec
            sleep_until(t_r, start)
            if abort.is_set():
                return
            records.append(board.read_all()[0])
            rec_times.append(t_r)

    start = time.perf_counter() + 0.05
    threads = [threading.Thread(target=worker, args=(i, start), daemon=True) for i in range(N)]
    threads.append(threading.Thread(target=sampler, args=(start,), daemon=True))
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    if errors:
        raise WorkerError("; ".join(errors))
    final, counts = board.read_all()
    return make_trace(rec_times, records, setup.objective, cfg.mode,
                      final_positions=final, step_counts=counts, replicate=replicate,
                      events=int(counts.sum()), diverged=bool(diverged),
                      message="; ".join(diverged), engine="parallel", time_scale=scale,
                      extras={"max_lateness": float(lateness.max()), "read_retries": board.retries})
