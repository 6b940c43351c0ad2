"""Frechet (Karcher) mean and variance of a weighted point set.

The mean is the minimizer of phi(x) = sum_i w_i d^2(x_i, x); inside a ball
satisfying the curvature/diameter assumption it exists, is unique, and the
fixed-point iteration

    x <- exp_x( sum_i w_i log_x(x_i) )

(Riemannian gradient descent on phi with unit step) converges to it.  We
iterate from points[0] until the aggregate tangent norm drops below ``tol``;
the returned residual makes the first-order optimality certificate explicit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .manifolds import CutLocus, Manifold, Point

__all__ = ["FrechetResult", "NoConvergence", "LogFailure",
           "frechet_mean", "frechet_variance",
           "frechet_mean_coords", "variance_at"]


class NoConvergence(Exception):
    """Fixed-point iteration did not reach tolerance within max_iter."""

    def __init__(self, iterations: int, residual: float, tol: float):
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(residual {residual:.3e}, tol {tol:.1e})")
        self.iterations = iterations
        self.residual = residual


class LogFailure(Exception):
    """A cut-locus pair appeared while computing the mean."""


@dataclass(frozen=True)
class FrechetResult:
    mean: Point
    variance: float
    iterations: int
    residual_grad_norm: float


def frechet_mean_coords(man: Manifold, coords: np.ndarray,
                        weights: np.ndarray | None = None,
                        tol: float = 1e-10,
                        max_iter: int = 200) -> tuple[np.ndarray, float, int, float]:
    """Array-level mean; ``coords`` stacks point coordinates on axis 0.

    Returns (mean coords, variance, iterations, residual).  This is the hot
    path used by the simulator's per-iteration metrics.
    """
    k = coords.shape[0]
    if k == 0:
        raise ValueError("empty point set")
    if weights is None:
        w = np.full(k, 1.0 / k)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (k,) or np.any(w < 0):
            raise ValueError("weights must be nonnegative, one per point")
        total = w.sum()
        if not np.isclose(total, 1.0, atol=1e-9):
            raise ValueError("weights must sum to 1")
    wcol = w.reshape((k,) + (1,) * (coords.ndim - 1))

    x = coords[0]
    iterations = 0
    try:
        logs = man.log_many(np.broadcast_to(x, coords.shape), coords)
        step = np.sum(wcol * logs, axis=0)
        residual = float(np.linalg.norm(step))
        while residual > tol and iterations < max_iter:
            x = man.exp_many(x[None], step[None])[0]
            iterations += 1
            logs = man.log_many(np.broadcast_to(x, coords.shape), coords)
            step = np.sum(wcol * logs, axis=0)
            residual = float(np.linalg.norm(step))
    except CutLocus as e:
        raise LogFailure(str(e)) from e
    if residual > tol:
        raise NoConvergence(iterations, residual, tol)
    variance = float(np.sum(w * man.dist_many(np.broadcast_to(x, coords.shape),
                                              coords) ** 2))
    return x, variance, iterations, residual


def frechet_mean(man: Manifold, points: list[Point],
                 weights=None, tol: float = 1e-10,
                 max_iter: int = 200) -> FrechetResult:
    """Weighted Frechet mean of ``points`` (uniform weights when omitted)."""
    coords = np.stack([p.coords for p in points])
    x, var, iters, resid = frechet_mean_coords(man, coords, weights, tol, max_iter)
    return FrechetResult(Point(man.manifold_id, x), var, iters, resid)


def frechet_variance(man: Manifold, points: list[Point], tol: float = 1e-10,
                     max_iter: int = 200) -> float:
    """Uniform-weight Frechet variance: phi evaluated at the mean."""
    return frechet_mean(man, points, None, tol, max_iter).variance


def variance_at(man: Manifold, coords: np.ndarray, center: np.ndarray,
                weights: np.ndarray | None = None) -> float:
    """phi(center): weighted average squared distance from ``center``."""
    k = coords.shape[0]
    w = np.full(k, 1.0 / k) if weights is None else np.asarray(weights, dtype=float)
    return float(np.sum(w * man.dist_many(np.broadcast_to(center, coords.shape),
                                          coords) ** 2))
