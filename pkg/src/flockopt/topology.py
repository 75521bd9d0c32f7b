"""Undirected 0/1 communication graphs between threads.

Graphs are small (a few hundred vertices at most), so everything here is
dense numpy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EIG_TOL = 1e-9
MAX_RETRIES = 100


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph with a symmetric {0,1} adjacency and empty diagonal."""

    adjacency: np.ndarray

    def __post_init__(self):
        A = np.array(self.adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise ValueError(f"adjacency must be a square matrix, got shape {A.shape}")
        if not np.isin(A, (0.0, 1.0)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        if not np.array_equal(A, A.T):
            raise ValueError("adjacency must be symmetric (undirected graph)")
        if np.any(np.diag(A) != 0):
            raise ValueError("self-loops are not allowed")
        A.setflags(write=False)
        object.__setattr__(self, "adjacency", A)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(i.tolist(), j.tolist()))

    def to_edge_list(self) -> str:
        lines = [f"# n = {self.n}"]
        lines += [f"{i} {j}" for i, j in self.edges()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(cls, text: str, n: int | None = None) -> "Graph":
        """Parse ``i j`` lines (0-indexed). A ``# n = <int>`` line fixes the size."""
        pairs = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].replace(" ", "")
                if body.startswith("n="):
                    n = int(body[2:])
                continue
            i, j = (int(tok) for tok in line.split())
            if i == j:
                raise ValueError(f"self-loop {i} {j} in edge list")
            pairs.append((i, j))
        if n is None:
            n = 1 + max((max(p) for p in pairs), default=-1)
        A = np.zeros((n, n))
        for i, j in pairs:
            A[i, j] = A[j, i] = 1.0
        return cls(A)

    def __eq__(self, other):
        return isinstance(other, Graph) and np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self):
        return hash(self.adjacency.tobytes())


@dataclass(frozen=True)
class LaplacianSummary:
    laplacian: np.ndarray
    lambda2: float
    trace: float
    connected: bool
    eigenvalues: np.ndarray


def laplacian(g: Graph) -> LaplacianSummary:
    """Laplacian ``L = D - A`` with its algebraic connectivity.

    ``lambda2`` is the second-smallest eigenvalue (ascending order from a
    symmetric eigensolver). A single vertex has ``lambda2 = 0``.
    """
    A = g.adjacency
    L = np.diag(A.sum(axis=1)) - A
    w = np.linalg.eigvalsh(L)
    lam2 = float(w[1]) if g.n > 1 else 0.0
    return LaplacianSummary(
        laplacian=L,
        lambda2=lam2,
        trace=float(abs(np.trace(L))),
        connected=bool(lam2 > EIG_TOL),
        eigenvalues=w,
    )


def complete_graph(n: int) -> Graph:
    return Graph(np.ones((n, n)) - np.eye(n))


def ring_graph(n: int) -> Graph:
    A = np.zeros((n, n))
    for i in range(n):
        j = (i + 1) % n
        if i != j:
            A[i, j] = A[j, i] = 1.0
    return Graph(A)


def random_k_neighbors(n: int, k: int, seed: int | None = None) -> Graph:
    """Random graph in which every vertex has at least ``k`` neighbours.

    Vertices are visited in a random order; each one short of ``k`` neighbours
    draws the missing partners uniformly among its non-neighbours (edges are
    undirected, so late vertices often need few or none). Disconnected draws
    are discarded and redrawn from the same generator, so the result is a
    deterministic function of ``seed``.
    """
    if not 0 < k < n:
        raise ValueError(f"need 0 < k < n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_RETRIES):
        A = np.zeros((n, n))
        for i in rng.permutation(n):
            need = k - int(A[i].sum())
            if need > 0:
                free = np.flatnonzero(A[i] == 0)
                free = free[free != i]
                picks = rng.choice(free, size=need, replace=False)
                A[i, picks] = A[picks, i] = 1.0
        g = Graph(A)
        if laplacian(g).connected:
            return g
    raise RuntimeError(
        f"could not draw a connected random_k_neighbors graph (n={n}, k={k}) "
        f"in {MAX_RETRIES} attempts"
    )


def make_topology(kind: str, n: int, k: int | None = None, seed: int | None = None) -> Graph:
    """Build a graph of family ``kind`` in {complete, ring, random_k_neighbors}."""
    if n < 2:
        raise ValueError(f"topologies need n >= 2, got {n}")
    if kind == "complete":
        return complete_graph(n)
    if kind == "ring":
        return ring_graph(n)
    if kind == "random_k_neighbors":
        if k is None:
            raise ValueError("random_k_neighbors requires k")
        if k >= n:
            raise ValueError(f"random_k_neighbors requires k < n, got k={k}, n={n}")
        return random_k_neighbors(n, k, seed)
    raise ValueError(f"unknown topology kind {kind!r}")


def empty_graph(n: int) -> Graph:
    return Graph(np.zeros((n, n)))


def quadratic_form_lower_bound_check(L: np.ndarray, e: np.ndarray, tol: float = 1e-9) -> bool:
    """Check ``e^T (L kron I_m) e >= lambda2 * sum_i |e_i|^2`` for zero-sum rows ``e``.

    ``e`` is ``(n, m)``: one deviation vector per vertex. Its columns must sum
    to zero, since the bound only holds on the complement of the consensus
    direction.
    """
    L = np.asarray(L, dtype=float)
    e = np.asarray(e, dtype=float)
    if e.ndim == 1:
        e = e[:, None]
    if np.any(np.abs(e.sum(axis=0)) > tol):
        raise ValueError("columns of e must sum to zero")
    w = np.linalg.eigvalsh(L)
    lam2 = w[1] if len(w) > 1 else 0.0
    lhs = float(np.einsum("ij,ik,jk->", L, e, e))
    rhs = float(lam2 * np.sum(e * e))
    return lhs >= rhs - tol * max(1.0, abs(rhs))
