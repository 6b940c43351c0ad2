"""Monte-Carlo certification suites for the geometric inequalities.

The comparison constants are adopted rather than re-derived, so the build
certifies them empirically: sample triples/configurations inside the working
ball and require the cosine-law, log-Lipschitz, variance-comparison, and
variance-contraction inequalities to hold everywhere (1e-9 slack).  These
suites back both the test suite and the ``lemmas`` CLI subcommand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import (GeometryConstants, check_cosine_law,
                        check_log_lipschitz, consensus_step_size)
from .frechet import frechet_mean_coords
from .manifolds import Manifold, sample_ball_point
from .network import MixingMatrix
from .optimizer import _consensus_all, _directed_edges, _undirected_edges

__all__ = ["SuiteReport", "cosine_law_suite", "log_lipschitz_suite",
           "variance_suite"]

SLACK = 1e-9


@dataclass(frozen=True)
class SuiteReport:
    name: str
    n_cases: int
    n_pass: int
    worst_margin: float  # most negative observed slack (>= -SLACK means pass)

    @property
    def ok(self) -> bool:
        return self.n_pass == self.n_cases

    def line(self) -> str:
        status = "pass" if self.ok else "FAIL"
        return (f"{self.name:<28s} {self.n_pass}/{self.n_cases} "
                f"worst margin {self.worst_margin:+.3e}  [{status}]")


def _ball_triple(man: Manifold, rng: np.random.Generator):
    center = man.random_point(rng)
    r = man.spec.D / 2.0
    return tuple(sample_ball_point(man, center, r, rng) for _ in range(3))


def cosine_law_suite(man: Manifold, gc: GeometryConstants, n_triples: int,
                     rng: np.random.Generator) -> SuiteReport:
    """Both cosine-law inequalities on random in-ball triples."""
    n_pass = 0
    worst = np.inf
    for _ in range(n_triples):
        a, b, c = _ball_triple(man, rng)
        r = check_cosine_law(man, gc, a, b, c)
        worst = min(worst, r.slack_upper, r.slack_lower)
        n_pass += int(r.upper_ok and r.lower_ok)
    return SuiteReport(f"cosine law ({man.manifold_id})", n_triples, n_pass, worst)


def log_lipschitz_suite(man: Manifold, gc: GeometryConstants, n_triples: int,
                        rng: np.random.Generator) -> SuiteReport:
    """Both log-distortion bounds on random in-ball triples."""
    n_pass = 0
    worst = np.inf
    lo = 1.0 / (1.0 + gc.C3 * gc.D ** 2)
    hi = 1.0 + gc.C4 * gc.D ** 2
    for _ in range(n_triples):
        x, y, z = _ball_triple(man, rng)
        r = check_log_lipschitz(man, gc, x, y, z)
        worst = min(worst, r.diff_norm - lo * r.dist_yz,
                    hi * r.dist_yz - r.diff_norm)
        n_pass += int(r.ok)
    return SuiteReport(f"log lipschitz ({man.manifold_id})", n_triples, n_pass, worst)


def variance_suite(man: Manifold, gc: GeometryConstants, mixing: MixingMatrix,
                   n_configs: int, rng: np.random.Generator) -> list:
    """Variance comparison (two sides) and consensus contraction on random configs.

    Each configuration: n points in the working ball treated as the y-iterates,
    the weighted pairwise disagreement sum_ij w_ij d^2(y_i, y_j), and one
    consensus step at s = C2/(2 C1).
    """
    n = mixing.n
    s = consensus_step_size(gc)
    xi = gc.C2 ** 3 * (1.0 - mixing.sigma2) / (
        4.0 * gc.C1 * (1.0 + gc.C4 * gc.D ** 2) ** 2)
    rho1 = 1.0 - xi
    lo_coef = 1.0 / (4.0 * n * (1.0 + gc.C3 * gc.D ** 2) ** 2)
    hi_coef = (1.0 + gc.C4 * gc.D ** 2) ** 2 / (2.0 * n * (1.0 - mixing.sigma2))
    src, dst, wts = _directed_edges(mixing.W)
    usrc, udst, uw = _undirected_edges(mixing.W)

    pass_i = pass_ii = pass_contr = 0
    worst_i = worst_ii = worst_contr = np.inf
    for _ in range(n_configs):
        center = man.random_point(rng)
        Y = np.stack([sample_ball_point(man, center, man.spec.D / 2.0, rng).coords
                      for _ in range(n)])
        d = man.dist_many(Y[usrc], Y[udst])
        pair_sum = float(2.0 * np.sum(uw * d ** 2))
        _, var_y, _, _ = frechet_mean_coords(man, Y)
        m_i = var_y - lo_coef * pair_sum
        m_ii = hi_coef * pair_sum - var_y
        worst_i = min(worst_i, m_i)
        worst_ii = min(worst_ii, m_ii)
        pass_i += int(m_i >= -SLACK)
        pass_ii += int(m_ii >= -SLACK)
        X = _consensus_all(man, Y, src, dst, wts, s)
        _, var_x, _, _ = frechet_mean_coords(man, X)
        m_c = rho1 * var_y - var_x
        worst_contr = min(worst_contr, m_c)
        pass_contr += int(m_c >= -SLACK)

    tag = f"{man.manifold_id}, n={n}"
    return [
        SuiteReport(f"variance lower ({tag})", n_configs, pass_i, worst_i),
        SuiteReport(f"variance upper ({tag})", n_configs, pass_ii, worst_ii),
        SuiteReport(f"contraction ({tag})", n_configs, pass_contr, worst_contr),
    ]
