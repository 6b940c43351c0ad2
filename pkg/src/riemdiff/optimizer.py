"""The two-step decentralized Riemannian diffusion iteration.

Each global iteration t runs, synchronously for every agent i,

    y_i = exp_{x_i}( -eta_t ghat_i(x_i) )          (local stochastic gradient)
    x_i <- exp_{y_i}( s sum_j w_ij log_{y_i}(y_j) ) (manifold consensus)

with eta_t = eta_0 / sqrt(t) (or a fixed eta) and a fixed consensus step s,
defaulting to the prescribed C2/(2 C1).  A centralized single-sequence
variant serves as a reference curve.

Runs are bit-deterministic for a given seed: all randomness is keyed by
(seed, agent_id, t), and agents are canonicalized into id order at entry so
that permuting the input layout of shards and W cannot change a single
floating-point operation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as rngmod
from .curvature import (GeometryConstants, TheoremConstants, compute_constants,
                        consensus_bound, consensus_step_size, gap_bound)
from .frechet import frechet_mean_coords
from .manifolds import (CutLocus, InjectivityViolation, Manifold, Point,
                        sample_ball_point)
from .network import MixingMatrix
from .problems import Problem, StochGradOracle

__all__ = [
    "AgentState", "RunConfig", "IterationRecord", "Trace", "MissingMetric",
    "gradient_step", "consensus_step", "run", "run_centralized", "ergodic_gap",
]

_INIT_KEY = 0x1A17  # substream tag for the common initial point

ALGORITHMS = ("diffusion_diminishing", "diffusion_fixed", "centralized_rsgd")


class MissingMetric(Exception):
    """A metric required for this computation was not recorded."""


@dataclass
class AgentState:
    """One agent's view between the two half-steps of iteration t."""

    id: int
    x: Point
    y: Point | None
    oracle: StochGradOracle
    t: int = 1


@dataclass(frozen=True)
class RunConfig:
    """Scalar knobs of a single run (graph/problem objects are passed alongside)."""

    algorithm: str
    T: int
    eta0: float | None = None
    eta_fixed: float | None = None
    s: float | None = None          # None -> C2 / (2 C1)
    batch_size: int = 32
    seed: int = 0
    record_every: int = 10
    enforce_assumptions: bool = True
    check_contraction: bool = True
    record_states: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.algorithm == "diffusion_fixed":
            if not (self.eta_fixed and self.eta_fixed > 0):
                raise ValueError("diffusion_fixed requires eta_fixed > 0")
        else:
            if not (self.eta0 and self.eta0 > 0):
                raise ValueError(f"{self.algorithm} requires eta0 > 0")
        if self.s is not None and not self.s > 0:
            raise ValueError("consensus step s must be positive")

    def eta(self, t: int) -> float:
        if self.algorithm == "diffusion_fixed":
            return self.eta_fixed
        return self.eta0 / math.sqrt(t)


@dataclass(frozen=True)
class IterationRecord:
    """Metrics of the iterates x^t (theory-bound columns may be nan)."""

    t: int
    consensus: float        # sum_ij w_ij d^2(x_i, x_j)
    frechet_var: float      # sum_i d^2(x_i, xbar^t)
    msd: float              # (1/n) sum_i d^2(x_i, x_*)
    fgap_bar: float         # f(xbar^t) - f(x_*)
    bound_consensus: float
    bound_gap: float
    clip_count: int         # cumulative clip events before producing x^t
    flags: str              # ";"-joined tokens, "" when clean


@dataclass
class Trace:
    records: list
    init_dist_sq_mean: float
    final_x: np.ndarray
    clip_total: int
    flag_events: dict
    states: list | None = None      # [(t, stacked x^t)] when record_states

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


# -- public per-agent operations -------------------------------------------------

def gradient_step(state: AgentState, eta_t: float) -> Point:
    """y = exp_x(-eta_t ghat(x)); deterministic given (seed, id, t)."""
    man = state.oracle.problem.manifold
    g, _ = state.oracle.gradient(state.id, state.x.coords, state.t)
    return man.exp(state.x, man.tangent(state.x, -eta_t * g))


def consensus_step(man: Manifold, ys: list, mixing: MixingMatrix,
                   s: float) -> list:
    """Simultaneous neighbor aggregation in each agent's own tangent space."""
    Y = np.stack([p.coords for p in ys])
    src, dst, wts = _directed_edges(mixing.W)
    X_next = _consensus_all(man, Y, src, dst, wts, s)
    return [Point(man.manifold_id, x) for x in X_next]


# -- internal vectorized kernels --------------------------------------------------

def _directed_edges(W: np.ndarray):
    off = W.copy()
    np.fill_diagonal(off, 0.0)
    src, dst = np.nonzero(off)
    return src, dst, W[src, dst]


def _undirected_edges(W: np.ndarray):
    src, dst, wts = _directed_edges(W)
    keep = src < dst
    return src[keep], dst[keep], wts[keep]


def _consensus_all(man, Y, src, dst, wts, s, t: int | None = None):
    V = np.zeros_like(Y)
    if src.size:
        try:
            L = man.log_many(Y[src], Y[dst])
        except CutLocus as e:
            where = f" at iteration {t}" if t is not None else ""
            raise CutLocus(f"consensus step{where}: {e}") from e
        w = wts.reshape((-1,) + (1,) * (Y.ndim - 1))
        np.add.at(V, src, w * L)
    return man.exp_many(Y, s * V)


def _weighted_disagreement(man, X, und_src, und_dst, und_w) -> float:
    if und_src.size == 0:
        return 0.0
    d = man.dist_many(X[und_src], X[und_dst])
    return float(2.0 * np.sum(und_w * d ** 2))


# -- the simulator -----------------------------------------------------------------

def _canonicalize(problem: Problem, W: np.ndarray):
    """Reorder agents into id order so input layout cannot affect a single flop.

    The caller's W is indexed by input position; it is permuted together with
    the shards.  Identity layouts pass through untouched.
    """
    ids = [s.agent_id for s in problem.shards]
    if ids == sorted(ids):
        return problem, W
    order = np.argsort(ids)
    problem = replace(problem, shards=[problem.shards[k] for k in order])
    return problem, W[np.ix_(order, order)]


def _initial_point(man, problem, seed) -> Point:
    rng = rngmod.substream(seed, _INIT_KEY)
    return sample_ball_point(man, problem.center, man.spec.D / 2.0, rng)


def run(cfg: RunConfig, problem: Problem, mixing: MixingMatrix,
        gc: GeometryConstants | None = None,
        tc: TheoremConstants | None = None,
        init: Point | None = None) -> Trace:
    """Simulate the diffusion iteration for t = 1..T and record metrics.

    All agents start at the same point (``init`` or a seed-derived random
    point in the working ball).  When ``enforce_assumptions`` is on, iterates
    leaving the configured ball are flagged in the trace, never projected.
    """
    if mixing.n != problem.n_agents:
        raise ValueError(f"mixing matrix is {mixing.n}x{mixing.n}, "
                         f"problem has {problem.n_agents} agents")
    problem, W = _canonicalize(problem, mixing.W)
    man = problem.manifold
    n = problem.n_agents
    if gc is None:
        gc = compute_constants(man.spec)
    s = cfg.s if cfg.s is not None else consensus_step_size(gc)
    s_star = consensus_step_size(gc)
    rho1 = None
    if cfg.check_contraction and abs(s - s_star) < 1e-12:
        rho1 = 1.0 - gc.C2 ** 3 * (1.0 - mixing.sigma2) / (
            4.0 * gc.C1 * (1.0 + gc.C4 * gc.D ** 2) ** 2)

    oracle = StochGradOracle(problem, cfg.batch_size, cfg.seed,
                             problem.G if np.isfinite(problem.G) else math.inf)
    x1 = init if init is not None else _initial_point(man, problem, cfg.seed)
    X = np.repeat(x1.coords[None], n, axis=0)

    src, dst, wts = _directed_edges(W)
    und = _undirected_edges(W)
    opt = problem.optimum
    f_opt = problem.global_objective(opt.coords) if opt is not None else math.nan
    init_dist = (float(np.mean(man.dist_many(X, np.broadcast_to(
        opt.coords, X.shape)) ** 2)) if opt is not None else math.nan)
    radius = man.spec.D / 2.0
    center = problem.center.coords

    records: list = []
    states: list | None = [] if cfg.record_states else None
    clip_cum = 0
    flag_events: dict = {}
    pending: dict = {}

    def note(token: str, count: int = 1):
        if count:
            pending[token] = pending.get(token, 0) + count
            flag_events[token] = flag_events.get(token, 0) + count

    def out_of_ball(pts) -> int:
        d = man.dist_many(pts, np.broadcast_to(center, pts.shape))
        return int(np.sum(d > radius + 1e-9))

    def record(t: int, var_y: float | None = None):
        consensus = _weighted_disagreement(man, X, *und)
        mean, var, _, _ = frechet_mean_coords(man, X)
        fvar = n * var
        msd = (float(np.mean(man.dist_many(
            X, np.broadcast_to(opt.coords, X.shape)) ** 2))
            if opt is not None else math.nan)
        fgap = (problem.global_objective(mean) - f_opt
                if opt is not None else math.nan)
        if rho1 is not None and var_y is not None and var > rho1 * var_y + 1e-9:
            note("contraction")
        b_cons = consensus_bound(tc, t) if tc is not None else math.nan
        b_gap = (gap_bound(tc, t, init_dist)
                 if tc is not None and opt is not None else math.nan)
        flags = ";".join(f"{k}:{v}" for k, v in sorted(pending.items()))
        records.append(IterationRecord(t, consensus, fvar, msd, fgap,
                                       b_cons, b_gap, clip_cum, flags))
        pending.clear()
        if states is not None:
            states.append((t, X.copy()))

    def recording(t: int) -> bool:
        return t == 1 or t == cfg.T + 1 or (t - 1) % cfg.record_every == 0

    if cfg.enforce_assumptions:
        note("x_out", out_of_ball(X))
    record(1)
    eta0_G = (cfg.eta0 or cfg.eta_fixed) * oracle.G
    for t in range(1, cfg.T + 1):
        eta = cfg.eta(t)
        G_all, clips = oracle.gradient_all(X, t)
        clip_cum += clips
        steps = -eta * G_all
        # Lemma-3 style guards: displacement stays within eta_0 G and s D
        assert float(np.max(np.linalg.norm(
            steps.reshape(n, -1), axis=1))) <= eta0_G * (1 + 1e-9) + 1e-12
        try:
            Y = man.exp_many(X, steps)
        except InjectivityViolation as e:
            raise InjectivityViolation(f"gradient step at iteration {t}: {e}") from e
        if cfg.enforce_assumptions:
            note("y_out", out_of_ball(Y))
        X = _consensus_all(man, Y, src, dst, wts, s, t=t)
        if cfg.enforce_assumptions:
            note("x_out", out_of_ball(X))
        if recording(t + 1):
            var_y = None
            if rho1 is not None:
                _, var_y, _, _ = frechet_mean_coords(man, Y)
            record(t + 1, var_y=var_y)

    return Trace(records, init_dist, X, clip_cum, flag_events, states)


def run_centralized(cfg: RunConfig, problem: Problem,
                    tc: TheoremConstants | None = None,
                    init: Point | None = None) -> Trace:
    """Single-sequence reference: x <- exp_x(-eta_t mean_i ghat_i(x))."""
    problem, _ = _canonicalize(problem, np.eye(problem.n_agents))
    man = problem.manifold
    n = problem.n_agents
    oracle = StochGradOracle(problem, cfg.batch_size, cfg.seed,
                             problem.G if np.isfinite(problem.G) else math.inf)
    x1 = init if init is not None else _initial_point(man, problem, cfg.seed)
    x = x1.coords.copy()
    opt = problem.optimum
    f_opt = problem.global_objective(opt.coords) if opt is not None else math.nan
    init_dist = (man.dist_many(x[None], opt.coords[None])[0] ** 2
                 if opt is not None else math.nan)

    records: list = []
    states: list | None = [] if cfg.record_states else None
    clip_cum = 0

    def record(t: int):
        msd = (float(man.dist_many(x[None], opt.coords[None])[0] ** 2)
               if opt is not None else math.nan)
        fgap = (problem.global_objective(x) - f_opt
                if opt is not None else math.nan)
        records.append(IterationRecord(t, 0.0, 0.0, msd, fgap,
                                       math.nan, math.nan, clip_cum, ""))
        if states is not None:
            states.append((t, x[None].copy()))

    def recording(t: int) -> bool:
        return t == 1 or t == cfg.T + 1 or (t - 1) % cfg.record_every == 0

    record(1)
    for t in range(1, cfg.T + 1):
        eta = cfg.eta(t)
        X_rep = np.repeat(x[None], n, axis=0)
        G_all, clips = oracle.gradient_all(X_rep, t)
        clip_cum += clips
        g = np.mean(G_all, axis=0)
        x = man.exp_many(x[None], (-eta * g)[None])[0]
        if recording(t + 1):
            record(t + 1)

    return Trace(records, float(init_dist), x[None], clip_cum, {}, states)


def ergodic_gap(trace: Trace, eta_of_t, T: int | None = None) -> float:
    """eta-weighted average of fgap_bar over t = 1..T.

    Requires the trace to contain fgap_bar at every t in 1..T (record_every=1
    runs); raises :class:`MissingMetric` otherwise.
    """
    by_t = {r.t: r for r in trace.records}
    if T is None:
        T = max(by_t) - 1 if max(by_t) > 1 else 1
    num = 0.0
    den = 0.0
    for t in range(1, T + 1):
        rec = by_t.get(t)
        if rec is None:
            raise MissingMetric(f"no record at t={t}; rerun with record_every=1")
        if math.isnan(rec.fgap_bar):
            raise MissingMetric(f"fgap_bar missing at t={t} (unknown optimum?)")
        w = eta_of_t(t)
        num += w * rec.fgap_bar
        den += w
    return num / den
