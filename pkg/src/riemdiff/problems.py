"""Optimization problems, stochastic gradient oracles, and synthetic data.

Two problem families:

* ``pca`` -- distributed principal subspace estimation on Grassmann(d, p):
  f_i(X) = -(1/(2 m_i)) sum_j |X^T z_j|^2, the benchmark problem.  Not
  geodesically convex globally, which is why the certified-convex family
  below exists alongside it.
* ``karcher`` -- weighted squared-distance (Frechet mean) objective:
  f_i(x) = (1/(2 m_i)) sum_j d^2(x, a_j), geodesically convex inside a small
  enough ball (sphere: radius < pi/4), with grad f = -mean log_x(a_j).

Both expose exact local gradients, per-sample gradients (for noise-bound
estimation), and a clipped uniform-with-replacement minibatch oracle whose
randomness is keyed by (seed, agent_id, t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .frechet import frechet_mean_coords
from .manifolds import (DimensionMismatch, Manifold, Point, grassmann_spec,
                        make_manifold, sample_ball_point)

__all__ = [
    "Shard", "Problem", "StochGradOracle",
    "pca_objective", "pca_grad", "karcher_objective", "karcher_grad",
    "gen_spiked_data", "gen_karcher_shards",
    "make_pca_problem", "make_karcher_problem",
    "estimate_bounds", "load_samples_csv", "partition_samples",
]


@dataclass(frozen=True)
class Shard:
    """One agent's local data: rows of R^d for PCA, stacked anchor coords for Karcher."""

    agent_id: int
    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=float, copy=True)
        if s.shape[0] < 1:
            raise ValueError("shard needs at least one sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("shard contains non-finite samples")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def m(self) -> int:
        return self.samples.shape[0]


# -- objectives and exact gradients -------------------------------------------

def _pca_check(x: np.ndarray, samples: np.ndarray) -> None:
    if samples.ndim != 2 or x.ndim != 2 or samples.shape[1] != x.shape[0]:
        raise DimensionMismatch(
            f"samples of shape {samples.shape} vs subspace basis {x.shape}")


def pca_objective(man: Manifold, x, shard: Shard) -> float:
    """-(1/(2m)) sum_j |X^T z_j|^2 (negated captured variance)."""
    X = x.coords if isinstance(x, Point) else np.asarray(x)
    _pca_check(X, shard.samples)
    return float(-0.5 * np.sum((shard.samples @ X) ** 2) / shard.m)


def pca_grad(man: Manifold, x, shard: Shard):
    """Riemannian gradient -(I - X X^T) A_i X with A_i the shard second moment."""
    X = x.coords if isinstance(x, Point) else np.asarray(x)
    _pca_check(X, shard.samples)
    euc = -(shard.samples.T @ (shard.samples @ X)) / shard.m
    g = man.project_many(X[None], euc[None])[0]
    if isinstance(x, Point):
        return man.tangent(x, g)
    return g


def karcher_objective(man: Manifold, x, shard: Shard) -> float:
    """(1/(2m)) sum_j d^2(x, a_j)."""
    X = x.coords if isinstance(x, Point) else np.asarray(x)
    d = man.dist_many(np.broadcast_to(X, shard.samples.shape), shard.samples)
    return float(0.5 * np.sum(d ** 2) / shard.m)


def karcher_grad(man: Manifold, x, shard: Shard):
    """-(1/m) sum_j log_x(a_j), the gradient of the halved mean squared distance."""
    X = x.coords if isinstance(x, Point) else np.asarray(x)
    logs = man.log_many(np.broadcast_to(X, shard.samples.shape), shard.samples)
    g = -np.mean(logs, axis=0)
    if isinstance(x, Point):
        return man.tangent(x, g)
    return g


@dataclass
class Problem:
    """A distributed objective over shards, with estimated gradient/noise bounds.

    ``optimum`` is the minimizer of the global objective when it is known
    exactly (computed offline); ``center`` anchors the working geodesic ball
    of diameter manifold.spec.D used for probing and domain monitoring.
    ``delta_hat`` / ``sigma_hat`` / ``G`` are filled by
    :func:`estimate_bounds` via the problem builders.
    """

    manifold: Manifold
    kind: str                      # "pca" | "karcher"
    shards: list
    optimum: Point | None
    center: Point
    delta_hat: float = math.nan
    sigma_hat: float = math.nan
    G: float = math.nan
    _stacked: np.ndarray | None = field(default=None, repr=False, init=False)

    def __post_init__(self):
        if self.kind not in ("pca", "karcher"):
            raise ValueError(f"unknown problem kind {self.kind!r}")
        ids = sorted(s.agent_id for s in self.shards)
        if ids != list(range(len(self.shards))):
            raise ValueError("shard agent ids must be a permutation of 0..n-1")
        if len({s.m for s in self.shards}) == 1:
            self._stacked = np.stack([s.samples for s in self.shards])

    @property
    def n_agents(self) -> int:
        return len(self.shards)

    def local_objective(self, i: int, x: np.ndarray) -> float:
        if self.kind == "pca":
            return pca_objective(self.manifold, x, self.shards[i])
        return karcher_objective(self.manifold, x, self.shards[i])

    def local_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        if self.kind == "pca":
            return pca_grad(self.manifold, x, self.shards[i])
        return karcher_grad(self.manifold, x, self.shards[i])

    def global_objective(self, x: np.ndarray) -> float:
        return sum(self.local_objective(i, x)
                   for i in range(self.n_agents)) / self.n_agents

    def global_gap(self, x: np.ndarray) -> float:
        """f(x) - f(x_*); requires a known optimum."""
        if self.optimum is None:
            raise ValueError("problem has no known optimum")
        return self.global_objective(x) - self.global_objective(self.optimum.coords)

    def per_sample_grads(self, i: int, x: np.ndarray) -> np.ndarray:
        """Per-sample Riemannian gradients, shape (m_i, *point_shape)."""
        Z = self.shards[i].samples
        if self.kind == "pca":
            coef = Z @ x                      # (m, p)
            U = Z - coef @ x.T                # rows (I - X X^T) z_j
            return -np.einsum("md,mp->mdp", U, coef)
        logs = self.manifold.log_many(np.broadcast_to(x, Z.shape), Z)
        return -logs


@dataclass
class StochGradOracle:
    """Clipped uniform-with-replacement minibatch gradient oracle.

    A batch covering the full shard (batch_size >= m_i) switches to the exact
    local gradient.  The output is radially clipped to norm <= G; unbiasedness
    holds pre-clip, and callers count the reported clip events.
    """

    problem: Problem
    batch_size: int
    seed: int
    G: float

    def gradient(self, agent_id: int, x: np.ndarray, t: int) -> tuple[np.ndarray, bool]:
        prob = self.problem
        shard = prob.shards[agent_id]
        if self.batch_size >= shard.m:
            g = prob.local_grad(agent_id, x)
        else:
            idx = rngmod.minibatch_indices(self.seed, agent_id, t, shard.m,
                                           self.batch_size)
            g = self._minibatch_grad(agent_id, x, idx)
        return self._clip(g)

    def gradient_all(self, X: np.ndarray, t: int) -> tuple[np.ndarray, int]:
        """Gradients for all agents at stacked iterates X, plus the clip count."""
        prob = self.problem
        n = prob.n_agents
        if prob._stacked is None:
            out = np.empty_like(X)
            clips = 0
            for i in range(n):
                g, c = self.gradient(i, X[i], t)
                out[i] = g
                clips += int(c)
            return out, clips
        data = prob._stacked                          # (n, m, ...)
        m = data.shape[1]
        if self.batch_size >= m:
            sel = data
        else:
            idx = rngmod.minibatch_indices_all(self.seed, np.arange(n), t, m,
                                               self.batch_size)
            sel = data[np.arange(n)[:, None], idx]    # (n, b, ...)
        if prob.kind == "pca":
            coef = sel @ X                            # (n, b, p)
            euc = -np.swapaxes(sel, 1, 2) @ coef / sel.shape[1]
            G_all = prob.manifold.project_many(X, euc)
        else:
            Xb = np.broadcast_to(X[:, None], sel.shape)
            logs = prob.manifold.log_many(Xb, sel)
            G_all = -np.mean(logs, axis=1)
        flat = G_all.reshape(n, -1)
        norms = np.linalg.norm(flat, axis=1)
        over = norms > self.G
        if np.any(over):
            scale = np.where(over, self.G / np.maximum(norms, 1e-300), 1.0)
            G_all = G_all * scale.reshape((n,) + (1,) * (G_all.ndim - 1))
        return G_all, int(np.sum(over))

    def _minibatch_grad(self, agent_id: int, x: np.ndarray,
                        idx: np.ndarray) -> np.ndarray:
        prob = self.problem
        sel = prob.shards[agent_id].samples[idx]
        if prob.kind == "pca":
            euc = -(sel.T @ (sel @ x)) / sel.shape[0]
            return prob.manifold.project_many(x[None], euc[None])[0]
        logs = prob.manifold.log_many(np.broadcast_to(x, sel.shape), sel)
        return -np.mean(logs, axis=0)

    def _clip(self, g: np.ndarray) -> tuple[np.ndarray, bool]:
        nrm = float(np.linalg.norm(g))
        if nrm > self.G:
            return g * (self.G / nrm), True
        return g, False


# -- data generation -----------------------------------------------------------

def gen_spiked_data(d: int, p: int, n_agents: int, m_per_agent: int,
                    spike_gap: float, noise: float,
                    rng: np.random.Generator) -> tuple[list, Point]:
    """Spiked-covariance samples z = U diag(lam) g + noise g' with planted U.

    Spike strengths are lam_k = spike_gap * (p - k + 1), so the population
    covariance is U diag(lam^2) U^T + noise^2 I and its top-p eigenspace is
    exactly span(U).  Samples are pooled, shuffled, and split equally.
    Returns the shards and the planted optimum span(U).
    """
    if not d > p >= 1:
        raise ValueError("spiked model requires d > p >= 1")
    basis = np.linalg.qr(rng.standard_normal((d, p)))[0]
    lam = spike_gap * np.arange(p, 0, -1, dtype=float)
    M = n_agents * m_per_agent
    z = (rng.standard_normal((M, p)) * lam) @ basis.T \
        + noise * rng.standard_normal((M, d))
    shards = partition_samples(z, n_agents, rng)
    planted = Point(f"grassmann({d},{p})", basis)
    return shards, planted


def partition_samples(data: np.ndarray, n_agents: int,
                      rng: np.random.Generator) -> list:
    """Shuffle rows and split equally (remainder rows dropped)."""
    M = data.shape[0]
    m = M // n_agents
    if m < 1:
        raise ValueError("fewer samples than agents")
    perm = rng.permutation(M)[: m * n_agents]
    return [Shard(i, data[perm[i * m:(i + 1) * m]]) for i in range(n_agents)]


def gen_karcher_shards(man: Manifold, center: Point, radius: float,
                       n_agents: int, m_per_agent: int,
                       rng: np.random.Generator) -> list:
    """Anchor points within the given geodesic ball, one shard per agent."""
    shards = []
    for i in range(n_agents):
        anchors = np.stack([
            sample_ball_point(man, center, radius, rng).coords
            for _ in range(m_per_agent)
        ])
        shards.append(Shard(i, anchors))
    return shards


# -- problem builders ----------------------------------------------------------

def _finalize(problem: Problem, batch_size: int, rng: np.random.Generator,
              n_probe: int, g_factor: float) -> Problem:
    problem.delta_hat, problem.sigma_hat = estimate_bounds(
        problem, batch_size, rng, n_probe=n_probe)
    problem.G = g_factor * problem.delta_hat
    return problem


def make_pca_problem(shards: list, p: int, D: float = 1.1,
                     batch_size: int = 32, rng: np.random.Generator | None = None,
                     n_probe: int = 200, g_factor: float = 2.0) -> Problem:
    """PCA problem with the offline pooled-PCA optimum as ground truth.

    The optimum is the top-p eigenspace of (1/n) sum_i A_i (the pooled second
    moment for equal shards): the exact minimizer of the global empirical
    objective, mirroring the ground-truth-by-offline-PCA protocol.
    """
    rng = rng if rng is not None else rngmod.substream(0, 0xB0)
    d = shards[0].samples.shape[1]
    man = make_manifold(grassmann_spec(d, p, D))
    A_bar = np.zeros((d, d))
    for s in shards:
        A_bar += (s.samples.T @ s.samples) / s.m
    A_bar /= len(shards)
    _, vecs = np.linalg.eigh(A_bar)
    top = vecs[:, -p:][:, ::-1].copy()
    optimum = man.point(top)
    problem = Problem(man, "pca", shards, optimum, center=optimum)
    return _finalize(problem, batch_size, rng, n_probe, g_factor)


def make_karcher_problem(man: Manifold, shards: list,
                         batch_size: int = 32,
                         rng: np.random.Generator | None = None,
                         n_probe: int = 200, g_factor: float = 2.0) -> Problem:
    """Karcher problem; the optimum is the pooled weighted Frechet mean.

    The global objective is (1/2) sum_{i,j} d^2(x, a_ij) / (n m_i), so its
    minimizer is the Frechet mean of all anchors with weight 1/(n m_i) each.
    """
    rng = rng if rng is not None else rngmod.substream(0, 0xB1)
    n = len(shards)
    coords = np.concatenate([s.samples for s in shards], axis=0)
    weights = np.concatenate([np.full(s.m, 1.0 / (n * s.m)) for s in shards])
    mean, _, _, _ = frechet_mean_coords(man, coords, weights)
    optimum = man.point(mean)
    problem = Problem(man, "karcher", shards, optimum, center=optimum)
    return _finalize(problem, batch_size, rng, n_probe, g_factor)


def load_samples_csv(path, normalize: bool = True) -> np.ndarray:
    """Sample matrix from CSV (rows = samples).

    With ``normalize``, values are scaled into [0, 1] using the global min and
    max, then the per-column mean is subtracted (centering).
    """
    data = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    if normalize:
        lo, hi = float(data.min()), float(data.max())
        if hi > lo:
            data = (data - lo) / (hi - lo)
        data = data - data.mean(axis=0)
    return data


def estimate_bounds(problem: Problem, batch_size: int,
                    rng: np.random.Generator, n_probe: int = 200,
                    safety: float = 1.1) -> tuple[float, float]:
    """Estimate the gradient bound delta and the oracle noise bound sigma.

    Probes are random points in the working ball (radius D/2 around the
    problem center); delta_hat = safety * max |grad f_i|, and sigma_hat^2 =
    safety * max of the exact conditional minibatch variance Var_pop/b (exact
    for uniform-with-replacement batches; zero when the batch covers the full
    shard, where the oracle is the exact gradient).  Probing cannot certify a
    supremum; the safety factor is documented and configurable.
    """
    if n_probe < 100:
        raise ValueError("n_probe must be at least 100")
    man = problem.manifold
    radius = man.spec.D / 2.0
    max_grad = 0.0
    max_var = 0.0
    for _ in range(n_probe):
        x = sample_ball_point(man, problem.center, radius, rng).coords
        for i in range(problem.n_agents):
            per = problem.per_sample_grads(i, x)
            flat = per.reshape(per.shape[0], -1)
            mean = flat.mean(axis=0)
            max_grad = max(max_grad, float(np.linalg.norm(mean)))
            if batch_size < problem.shards[i].m:
                pop_var = float(np.mean(np.sum((flat - mean) ** 2, axis=1)))
                max_var = max(max_var, pop_var)
    delta_hat = safety * max_grad
    sigma_hat = math.sqrt(safety * max_var / batch_size)
    return delta_hat, sigma_hat
