"""Communication graphs and gossip mixing matrices.

The algorithm only needs a symmetric, doubly stochastic, nonnegative W with
positive diagonal and w_ij = 0 across non-edges; sigma_2(W), its second
largest singular value, drives every consensus-rate constant.  The paper
assumes such a W exists; Metropolis-Hastings weights are the standard
construction and the default here.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AssumptionViolation", "ConnectivityFailure",
    "Graph", "MixingMatrix",
    "gen_er", "gen_cycle", "gen_complete",
    "metropolis_weights", "sigma2", "validate_mixing",
    "save_mixing_csv", "load_mixing_csv",
]

_TOL = 1e-12


class AssumptionViolation(Exception):
    """A named clause of the network assumption failed."""


class ConnectivityFailure(Exception):
    """Could not sample a connected graph within the retry budget."""


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes 0..n-1; must be connected."""

    n: int
    edges: frozenset  # of (i, j) tuples with i < j

    def __post_init__(self):
        for (i, j) in self.edges:
            if not (0 <= i < j < self.n):
                raise ValueError(f"bad edge ({i},{j}) for n={self.n}")
        if not self.is_connected():
            raise AssumptionViolation("network topology: graph is not connected")

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for (i, j) in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=bool)
        for (i, j) in self.edges:
            A[i, j] = A[j, i] = True
        return A

    def is_connected(self) -> bool:
        if self.n == 1:
            return True
        adj = [[] for _ in range(self.n)]
        for (i, j) in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        seen = [False] * self.n
        stack = [0]
        seen[0] = True
        count = 1
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    count += 1
                    stack.append(v)
        return count == self.n


@dataclass(frozen=True)
class MixingMatrix:
    """Validated gossip weights; construction enforces every clause."""

    W: np.ndarray
    sigma2: float = field(init=False)
    graph: Graph | None = None

    def __post_init__(self):
        W = np.array(self.W, dtype=float, copy=True)
        W.flags.writeable = False
        object.__setattr__(self, "W", W)
        validate_mixing(W, self.graph)
        object.__setattr__(self, "sigma2", sigma2(W))

    @property
    def n(self) -> int:
        return self.W.shape[0]


def gen_er(n: int, p: float, rng: np.random.Generator,
           max_retries: int = 1000) -> Graph:
    """Erdos-Renyi G(n, p), resampled from fresh substreams until connected."""
    if n < 2:
        raise ValueError("ER graph needs n >= 2")
    if not 0.0 < p <= 1.0:
        raise ValueError("edge probability must be in (0, 1]")
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(max_retries):
        sub = rng.spawn(1)[0]
        mask = sub.uniform(size=iu.shape[0]) < p
        edges = frozenset((int(i), int(j)) for i, j in zip(iu[mask], ju[mask]))
        try:
            return Graph(n, edges)
        except AssumptionViolation:
            continue
    raise ConnectivityFailure(
        f"no connected G({n},{p}) in {max_retries} tries; p too small for n")


def gen_cycle(n: int) -> Graph:
    if n < 3:
        raise ValueError("cycle needs n >= 3")
    edges = frozenset(tuple(sorted((i, (i + 1) % n))) for i in range(n))
    return Graph(n, edges)


def gen_complete(n: int) -> Graph:
    if n < 2:
        raise ValueError("complete graph needs n >= 2")
    edges = frozenset((i, j) for i in range(n) for j in range(i + 1, n))
    return Graph(n, edges)


def metropolis_weights(g: Graph) -> MixingMatrix:
    """Metropolis-Hastings weights: w_ij = 1/(1 + max(deg_i, deg_j)) on edges.

    The diagonal absorbs the remainder, which keeps it strictly positive for
    any simple graph.
    """
    deg = g.degrees()
    W = np.zeros((g.n, g.n))
    for (i, j) in g.edges:
        w = 1.0 / (1.0 + max(deg[i], deg[j]))
        W[i, j] = W[j, i] = w
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    return MixingMatrix(W, graph=g)


def sigma2(W: np.ndarray) -> float:
    """Second largest singular value, via dense SVD (n is at most a few hundred)."""
    s = np.linalg.svd(np.asarray(W, dtype=float), compute_uv=False)
    val = float(s[1]) if s.shape[0] > 1 else 0.0
    if val >= 1.0 - _TOL:
        raise AssumptionViolation(
            f"sigma_2(W) = {val} is not below 1; W is disconnected or invalid")
    return val


def validate_mixing(W: np.ndarray, graph: Graph | None = None,
                    tol: float = _TOL) -> None:
    """Enforce each clause of the network assumption, naming the one violated."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise AssumptionViolation("mixing matrix: W must be square")
    n = W.shape[0]
    if np.max(np.abs(W - W.T)) > tol:
        raise AssumptionViolation("mixing matrix: symmetry violated")
    if np.max(np.abs(W.sum(axis=1) - 1.0)) > tol:
        raise AssumptionViolation("mixing matrix: rows must sum to 1 (doubly stochastic)")
    if np.max(np.abs(W.sum(axis=0) - 1.0)) > tol:
        raise AssumptionViolation("mixing matrix: columns must sum to 1 (doubly stochastic)")
    if np.min(W) < -tol:
        raise AssumptionViolation("mixing matrix: entrywise nonnegativity violated")
    if np.min(np.diag(W)) <= 0.0:
        raise AssumptionViolation("mixing matrix: diagonal entries must be positive")
    if graph is not None:
        if graph.n != n:
            raise AssumptionViolation("mixing matrix: size differs from graph")
        A = graph.adjacency()
        off = ~np.eye(n, dtype=bool)
        if np.any(np.abs(W[off & ~A]) > 0.0):
            raise AssumptionViolation(
                "mixing matrix: nonzero weight across a non-edge")
    sigma2(W)  # raises when >= 1 (network disconnected)


def save_mixing_csv(path, mm: MixingMatrix) -> None:
    """Row-major, header-less CSV of W."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        for row in mm.W:
            writer.writerow([repr(float(x)) for x in row])


def load_mixing_csv(path, graph: Graph | None = None) -> MixingMatrix:
    """Read W from CSV; the sparsity pattern defines the graph when none is given."""
    with open(path, newline="") as f:
        rows = [[float(x) for x in row] for row in csv.reader(f) if row]
    W = np.array(rows, dtype=float)
    if graph is None:
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise AssumptionViolation("mixing matrix: CSV is not square")
        n = W.shape[0]
        edges = frozenset(
            (i, j) for i in range(n) for j in range(i + 1, n) if W[i, j] != 0.0)
        graph = Graph(n, edges)
    return MixingMatrix(W, graph=graph)
