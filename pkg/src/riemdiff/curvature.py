"""Comparison-geometry constants and convergence-bound calculators.

The consensus and optimality-gap guarantees are stated in terms of four
geometric constants tied to the curvature range [K_min, K_max] and the domain
diameter D:

* C1 >= 1 and 0 < C2 <= 1 bound the two-sided law of cosines on geodesic
  triangles (:func:`check_cosine_law`),
* C3, C4 >= 0 bound how much the logarithm map distorts distances
  (:func:`check_log_lipschitz`).

We use the standard comparison forms (coth / cot of sqrt|K| D) and, because
tightest constants are not the point, certify them empirically: the test
suite Monte-Carlo samples triples inside the domain ball and requires both
checkers to pass everywhere.  From these the derived constants xi, C(xi), B,
rho_1, rho_2 feed the O(1/t) consensus bound and the O(log T / sqrt T)
ergodic gap bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .manifolds import DomainTooLarge, Manifold, ManifoldSpec, Point

__all__ = [
    "GeometryConstants", "TheoremConstants",
    "compute_constants", "theorem_constants",
    "CosineLawCheck", "LogLipschitzCheck",
    "check_cosine_law", "check_log_lipschitz",
    "consensus_bound", "gap_bound", "step_schedule", "consensus_step_size",
]

CHECK_TOL = 1e-9


@dataclass(frozen=True)
class GeometryConstants:
    """Curvature comparison constants for a (K_min, K_max, D) triple."""

    C1: float
    C2: float
    C3: float
    C4: float
    D: float
    K_min: float
    K_max: float

    def __post_init__(self):
        if self.C1 < 1.0:
            raise ValueError("C1 must be >= 1")
        if not 0.0 < self.C2 <= 1.0:
            raise ValueError("C2 must be in (0, 1]")
        if self.C3 < 0.0 or self.C4 < 0.0:
            raise ValueError("C3 and C4 must be nonnegative")


def compute_constants(spec: ManifoldSpec) -> GeometryConstants:
    """Standard comparison constants for the spec's curvature range and diameter.

    C1 = a coth(a) with a = sqrt|K_min| D when K_min < 0, else 1;
    C2 = b cot(b)  with b = sqrt(K_max) D  when K_max > 0, else 1;
    C3 = C4 = max(|K_min|, K_max).
    """
    D = spec.D
    if spec.K_max > 0 and D >= math.pi / (2.0 * math.sqrt(spec.K_max)):
        raise DomainTooLarge(
            f"D={D} >= pi/(2 sqrt(K_max)); the lower cosine-law constant degenerates")
    if spec.K_min < 0:
        a = math.sqrt(-spec.K_min) * D
        C1 = a / math.tanh(a)
    else:
        C1 = 1.0
    if spec.K_max > 0:
        b = math.sqrt(spec.K_max) * D
        C2 = b / math.tan(b)
    else:
        C2 = 1.0
    C3 = C4 = max(abs(spec.K_min), spec.K_max)
    return GeometryConstants(C1, C2, C3, C4, D, spec.K_min, spec.K_max)


@dataclass(frozen=True)
class TheoremConstants:
    """Derived constants of the convergence theorems for one experiment."""

    xi: float
    C_of_xi: float
    B: float
    rho1: float
    rho2: float
    s: float
    eta0: float
    sigma2W: float
    delta: float
    sigma: float
    n: int
    G: float
    C1: float  # carried along: the gap bound needs C1 (sigma^2 + delta^2)

    def __post_init__(self):
        if not 0.0 < self.xi < 1.0:
            raise ValueError("xi must lie in (0, 1); is sigma_2(W) < 1?")
        if not 0.0 < self.s <= 0.5:
            raise ValueError("consensus step s must lie in (0, 1/2]")


def theorem_constants(gc: GeometryConstants, sigma2W: float, delta: float,
                      sigma: float, n: int, G: float) -> TheoremConstants:
    """Assemble xi, C(xi), B, rho_1, rho_2, s and eta_0 = min{1, D/G}."""
    xi = gc.C2 ** 3 * (1.0 - sigma2W) / (4.0 * gc.C1 * (1.0 + gc.C4 * gc.D ** 2) ** 2)
    C_of_xi = (1.0 + xi ** 2) / xi ** 4
    B = (1.0 - xi) * (2.0 * gc.C1 * (sigma ** 2 + delta ** 2) + delta ** 2 / xi)
    return TheoremConstants(
        xi=xi,
        C_of_xi=C_of_xi,
        B=B,
        rho1=1.0 - xi,
        rho2=1.0 - xi ** 2,
        s=consensus_step_size(gc),
        eta0=min(1.0, gc.D / G),
        sigma2W=sigma2W,
        delta=delta,
        sigma=sigma,
        n=n,
        G=G,
        C1=gc.C1,
    )


@dataclass(frozen=True)
class CosineLawCheck:
    upper_ok: bool
    lower_ok: bool
    slack_upper: float
    slack_lower: float


def check_cosine_law(man: Manifold, gc: GeometryConstants,
                     a: Point, b: Point, c: Point) -> CosineLawCheck:
    """Two-sided law of cosines at vertex b.

    Upper: d^2(a,c) <= C1 d^2(b,c) + d^2(a,b) - 2 <log_b a, log_b c>
    Lower: d^2(a,c) >= C2 d^2(b,c) + d^2(a,b) - 2 <log_b a, log_b c>

    Slack is reported as (RHS - LHS) for the upper and (LHS - RHS) for the
    lower inequality; ok means slack >= -1e-9.  Never raises on failure.
    """
    d_ac2 = man.dist(a, c) ** 2
    d_bc2 = man.dist(b, c) ** 2
    d_ab2 = man.dist(a, b) ** 2
    cross = man.inner(b, man.log(b, a), man.log(b, c))
    slack_upper = (gc.C1 * d_bc2 + d_ab2 - 2.0 * cross) - d_ac2
    slack_lower = d_ac2 - (gc.C2 * d_bc2 + d_ab2 - 2.0 * cross)
    return CosineLawCheck(
        upper_ok=slack_upper >= -CHECK_TOL,
        lower_ok=slack_lower >= -CHECK_TOL,
        slack_upper=slack_upper,
        slack_lower=slack_lower,
    )


@dataclass(frozen=True)
class LogLipschitzCheck:
    ok: bool
    lower_ok: bool
    upper_ok: bool
    diff_norm: float
    dist_yz: float
    ratio: float  # diff_norm / dist_yz; 1.0 when y == z


def check_log_lipschitz(man: Manifold, gc: GeometryConstants,
                        x: Point, y: Point, z: Point) -> LogLipschitzCheck:
    """Distance distortion of the log map based at x.

    (1 + C3 D^2)^{-1} d(y,z) <= |log_x y - log_x z| <= (1 + C4 D^2) d(y,z),
    each side with 1e-9 tolerance.  Reports the ratio for diagnostics.
    """
    diff = float(np.linalg.norm(man.log(x, y).vec - man.log(x, z).vec))
    d = man.dist(y, z)
    lower_ok = diff >= d / (1.0 + gc.C3 * gc.D ** 2) - CHECK_TOL
    upper_ok = diff <= (1.0 + gc.C4 * gc.D ** 2) * d + CHECK_TOL
    return LogLipschitzCheck(
        ok=lower_ok and upper_ok,
        lower_ok=lower_ok,
        upper_ok=upper_ok,
        diff_norm=diff,
        dist_yz=d,
        ratio=diff / d if d > 0 else 1.0,
    )


def consensus_bound(tc: TheoremConstants, t: int) -> float:
    """Bound on the summed squared distances to the Frechet mean at iteration t."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return tc.eta0 ** 2 * tc.C_of_xi * tc.n * tc.B / t


def gap_bound(tc: TheoremConstants, T: int, init_dist_sq_mean: float) -> float:
    """Bound on the eta-weighted ergodic optimality gap after horizon T.

    ``init_dist_sq_mean`` is the average over agents of d^2(x_i^1, x_*).
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    term_init = init_dist_sq_mean / (2.0 * tc.eta0 * math.sqrt(T))
    term_rate = (tc.eta0
                 * (tc.delta * math.sqrt(tc.C_of_xi * tc.B)
                    + tc.C1 * (tc.sigma ** 2 + tc.delta ** 2))
                 * (1.0 + math.log(T)) / math.sqrt(T))
    return term_init + term_rate


def step_schedule(eta0: float, t: int) -> float:
    """Diminishing gradient step eta_t = eta_0 / sqrt(t)."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return eta0 / math.sqrt(t)


def consensus_step_size(gc: GeometryConstants) -> float:
    """The prescribed consensus step s = C2 / (2 C1), always in (0, 1/2]."""
    return gc.C2 / (2.0 * gc.C1)
