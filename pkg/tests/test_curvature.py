import math

import numpy as np
import pytest

from riemdiff.curvature import (GeometryConstants, TheoremConstants,
                                check_cosine_law, check_log_lipschitz,
                                compute_constants, consensus_bound,
                                consensus_step_size, gap_bound, step_schedule,
                                theorem_constants)
from riemdiff.manifolds import (DomainTooLarge, ManifoldSpec, euclidean_spec,
                                grassmann_spec, make_manifold,
                                sample_ball_point, sphere_spec)

from conftest import rng


def test_flat_space_constants_degenerate():
    gc = compute_constants(euclidean_spec(5))
    assert gc.C1 == 1.0 and gc.C2 == 1.0
    assert gc.C3 == 0.0 and gc.C4 == 0.0


def test_sphere_constants_at_quarter_diameter():
    gc = compute_constants(sphere_spec(2, D=math.pi / 4))
    assert abs(gc.C2 - math.pi / 4) < 1e-12   # (pi/4) cot(pi/4)
    assert gc.C1 == 1.0                        # K_min = 1 > 0
    assert gc.C3 == 1.0 and gc.C4 == 1.0


def test_negative_curvature_uses_coth():
    spec = ManifoldSpec("euclidean", 3, 0, -1.0, 0.0, math.inf, 0.8)
    gc = compute_constants(spec)
    assert abs(gc.C1 - 0.8 / math.tanh(0.8)) < 1e-14
    assert gc.C2 == 1.0
    assert gc.C3 == gc.C4 == 1.0


def test_domain_too_large_rejected():
    # the spec constructor itself guards D < pi/(2 sqrt(K_max))
    with pytest.raises(DomainTooLarge):
        ManifoldSpec("sphere", 2, 0, 1.0, 1.0, math.pi, 1.6)
    with pytest.raises(DomainTooLarge):
        sphere_spec(2, D=math.pi / 2)


def test_cosine_law_degenerate_vertex():
    man = make_manifold(sphere_spec(2))
    gc = compute_constants(man.spec)
    g = rng(20)
    a = man.random_point(g)
    c = sample_ball_point(man, a, man.spec.D / 2, g)
    r = check_cosine_law(man, gc, a, a, c)
    assert r.upper_ok and r.lower_ok


def test_cosine_law_exact_in_flat_space():
    man = make_manifold(euclidean_spec(4))
    gc = compute_constants(man.spec)
    g = rng(21)
    for _ in range(100):
        center = man.random_point(g)
        a, b, c = (sample_ball_point(man, center, 1.0, g) for _ in range(3))
        r = check_cosine_law(man, gc, a, b, c)
        assert abs(r.slack_upper) < 1e-12 and abs(r.slack_lower) < 1e-12


@pytest.mark.parametrize("spec", [sphere_spec(2), grassmann_spec(6, 2)])
def test_cosine_law_monte_carlo(spec):
    man = make_manifold(spec)
    gc = compute_constants(spec)
    g = rng(22)
    for _ in range(1000):
        center = man.random_point(g)
        pts = [sample_ball_point(man, center, spec.D / 2, g) for _ in range(3)]
        r = check_cosine_law(man, gc, *pts)
        assert r.upper_ok and r.lower_ok


def test_log_lipschitz_trivial_cases():
    man = make_manifold(sphere_spec(2))
    gc = compute_constants(man.spec)
    g = rng(23)
    c = man.random_point(g)
    x = sample_ball_point(man, c, man.spec.D / 2, g)
    z = sample_ball_point(man, c, man.spec.D / 2, g)
    r = check_log_lipschitz(man, gc, x, z, z)   # y == z
    assert r.ok and r.dist_yz == 0.0
    r = check_log_lipschitz(man, gc, x, x, z)   # x == y: equality case
    assert r.ok
    assert abs(r.diff_norm - man.dist(x, z)) < 1e-12


@pytest.mark.parametrize("spec", [sphere_spec(2), grassmann_spec(6, 2)])
def test_log_lipschitz_monte_carlo(spec):
    man = make_manifold(spec)
    gc = compute_constants(spec)
    g = rng(24)
    for _ in range(1000):
        center = man.random_point(g)
        pts = [sample_ball_point(man, center, spec.D / 2, g) for _ in range(3)]
        assert check_log_lipschitz(man, gc, *pts).ok


def _toy_tc(xi: float) -> TheoremConstants:
    return TheoremConstants(xi=xi, C_of_xi=(1 + xi ** 2) / xi ** 4,
                            B=5.0, rho1=1 - xi, rho2=1 - xi ** 2, s=0.5,
                            eta0=1.0, sigma2W=0.5, delta=1.0, sigma=0.5,
                            n=4, G=2.0, C1=1.0)


def test_consensus_bound_scaling():
    tc = _toy_tc(0.25)
    assert abs(consensus_bound(tc, 7) / consensus_bound(tc, 14) - 2.0) < 1e-12
    assert abs(_toy_tc(0.5).C_of_xi - 20.0) < 1e-12   # (1 + 1/4) / (1/16)


def test_theorem_constants_hand_computation():
    # independent scalar recomputation of the full pipeline on the sphere
    # desk-scale setup: n = 10, sigma2 from the Metropolis cycle graph
    gc = compute_constants(sphere_spec(2, D=math.pi / 4))
    sigma2 = abs(1 / 3 + (2 / 3) * math.cos(2 * math.pi / 10))
    delta, sigma, G = 0.5, 0.08, 2.0
    tc = theorem_constants(gc, sigma2, delta, sigma, 10, G)

    C2 = (math.pi / 4) / math.tan(math.pi / 4)
    xi = C2 ** 3 * (1 - sigma2) / (4 * 1.0 * (1 + 1.0 * (math.pi / 4) ** 2) ** 2)
    assert abs(tc.xi - xi) < 1e-15
    assert abs(tc.C_of_xi - (1 + xi ** 2) / xi ** 4) < 1e-3
    B = (1 - xi) * (2 * 1.0 * (sigma ** 2 + delta ** 2) + delta ** 2 / xi)
    assert abs(tc.B - B) < 1e-10
    assert abs(tc.rho1 - (1 - xi)) < 1e-15
    assert abs(tc.rho2 - (1 - xi ** 2)) < 1e-15
    assert tc.eta0 == min(1.0, (math.pi / 4) / G)
    t = 321
    expect = tc.eta0 ** 2 * ((1 + xi ** 2) / xi ** 4) * 10 * B / t
    assert abs(consensus_bound(tc, t) - expect) / expect < 1e-12


def test_gap_bound_structure():
    tc = _toy_tc(0.25)
    base = gap_bound(tc, 1, 0.0)
    expect = tc.eta0 * (tc.delta * math.sqrt(tc.C_of_xi * tc.B)
                        + tc.C1 * (tc.sigma ** 2 + tc.delta ** 2))
    assert abs(base - expect) < 1e-12          # log 1 = 0
    # affine in the initial distance
    b1 = gap_bound(tc, 50, 1.0)
    b2 = gap_bound(tc, 50, 2.0)
    assert abs((b2 - b1) - 1.0 / (2 * tc.eta0 * math.sqrt(50))) < 1e-12
    # monotone decreasing for T >= 8
    vals = [gap_bound(tc, T, 0.3) for T in np.unique(
        np.logspace(math.log10(8), 6, 200).astype(int))]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_step_schedule():
    assert step_schedule(0.3, 1) == 0.3
    assert abs(step_schedule(0.3, 4) - 0.15) < 1e-15
    with pytest.raises(ValueError):
        step_schedule(0.3, 0)


def test_consensus_step_size_values():
    assert consensus_step_size(compute_constants(euclidean_spec(3))) == 0.5
    s = consensus_step_size(compute_constants(sphere_spec(2, D=math.pi / 4)))
    assert abs(s - math.pi / 8) < 1e-12        # C2/2 with C1 = 1


def test_xi_stays_in_unit_interval():
    for spec in (euclidean_spec(3), sphere_spec(2), grassmann_spec(6, 2)):
        gc = compute_constants(spec)
        for s2 in (0.0, 0.5, 0.99, 0.999999):
            tc = theorem_constants(gc, s2, 1.0, 0.5, 8, 2.0)
            assert 0.0 < tc.xi < 1.0
            assert 0.0 < tc.rho2 <= 1.0
            if tc.xi ** 2 > 4e-16:   # below this rho2 saturates in float64
                assert tc.rho2 < 1.0


def test_displacement_guards():
    # s D < inj and eta0 G <= D for assembled constants
    for spec in (sphere_spec(2), grassmann_spec(6, 2)):
        gc = compute_constants(spec)
        tc = theorem_constants(gc, 0.8, 1.3, 0.4, 10, 2.6)
        assert tc.s * gc.D < spec.inj
        assert tc.eta0 * tc.G <= gc.D + 1e-15


def test_constants_invariant_validation():
    with pytest.raises(ValueError):
        GeometryConstants(0.5, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0)   # C1 < 1
    with pytest.raises(ValueError):
        GeometryConstants(1.0, 1.5, 0.0, 0.0, 1.0, 0.0, 0.0)   # C2 > 1
