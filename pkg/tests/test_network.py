import math

import numpy as np
import pytest

from riemdiff.network import (AssumptionViolation, ConnectivityFailure, Graph,
                              MixingMatrix, gen_complete, gen_cycle, gen_er,
                              load_mixing_csv, metropolis_weights,
                              save_mixing_csv, sigma2, validate_mixing)

from conftest import rng


def cycle_sigma2(n: int) -> float:
    # circulant eigenvalues of the Metropolis cycle chain: 1/3 + (2/3) cos(2 pi k / n)
    lams = [1 / 3 + (2 / 3) * math.cos(2 * math.pi * k / n) for k in range(1, n)]
    return max(abs(l) for l in lams)


def test_er_two_nodes_full_probability():
    g = gen_er(2, 1.0, rng(30))
    assert g.edges == frozenset({(0, 1)})


def test_er_reproducible():
    a = gen_er(35, 0.3, rng(31))
    b = gen_er(35, 0.3, rng(31))
    assert a.edges == b.edges
    assert a.is_connected()


def test_er_edge_count_statistics():
    # mean edge count over 100 seeds within 4 standard errors of p n(n-1)/2
    n, p, reps = 35, 0.3, 100
    pairs = n * (n - 1) / 2
    counts = [len(gen_er(n, p, rng(32, k)).edges) for k in range(reps)]
    expected = p * pairs
    stderr = math.sqrt(pairs * p * (1 - p) / reps)
    assert abs(np.mean(counts) - expected) < 4 * stderr


def test_er_connectivity_failure():
    with pytest.raises(ConnectivityFailure):
        gen_er(60, 0.001, rng(33), max_retries=50)


def test_cycle_triangle_equals_complete():
    assert gen_cycle(3).edges == gen_complete(3).edges


def test_cycle_and_complete_shapes():
    g = gen_cycle(8)
    assert len(g.edges) == 8
    assert all(d == 2 for d in g.degrees())
    k = gen_complete(7)
    assert len(k.edges) == 7 * 6 // 2


def test_metropolis_complete_is_averaging_matrix():
    mm = metropolis_weights(gen_complete(6))
    np.testing.assert_allclose(mm.W, np.full((6, 6), 1 / 6), atol=1e-15)
    assert mm.sigma2 < 1e-12


def test_metropolis_cycle_matches_circulant_oracle():
    for n in (4, 10, 35):
        mm = metropolis_weights(gen_cycle(n))
        offdiag = mm.W[0, 1]
        assert abs(offdiag - 1 / 3) < 1e-15
        assert abs(mm.sigma2 - cycle_sigma2(n)) < 1e-10


def test_metropolis_rows_sum_to_one():
    g = gen_er(20, 0.4, rng(34))
    mm = metropolis_weights(g)
    np.testing.assert_allclose(mm.W.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(mm.W.sum(axis=0), 1.0, atol=1e-12)
    assert np.all(np.diag(mm.W) > 0)


def test_sigma2_identity_rejected():
    with pytest.raises(AssumptionViolation):
        sigma2(np.eye(4))


def test_validate_names_each_clause():
    W = metropolis_weights(gen_cycle(5)).W

    bad = W.copy(); bad[0, 1] += 1e-3
    with pytest.raises(AssumptionViolation, match="symmetry"):
        validate_mixing(bad)

    bad = W.copy(); bad[0, 0] += 1e-3
    with pytest.raises(AssumptionViolation, match="sum to 1"):
        validate_mixing(bad)

    bad = W.copy()
    bad[0, 1] = bad[1, 0] = -0.05                  # negative weight, rebalanced
    bad[0, 0] += W[0, 1] + 0.05
    bad[1, 1] += W[0, 1] + 0.05
    with pytest.raises(AssumptionViolation, match="nonnegativity"):
        validate_mixing(bad)

    # ring-shift average: symmetric, doubly stochastic, but zero diagonal
    n = 5
    ring = (np.roll(np.eye(n), 1, axis=1) + np.roll(np.eye(n), -1, axis=1)) / 2
    with pytest.raises(AssumptionViolation, match="diagonal"):
        validate_mixing(ring)

    # weight across a chord that is not an edge of the cycle
    bad = W.copy()
    shift = W[0, 1] / 2
    bad[0, 2] = bad[2, 0] = shift
    bad[0, 0] -= shift
    bad[2, 2] -= shift
    with pytest.raises(AssumptionViolation, match="non-edge"):
        validate_mixing(bad, gen_cycle(5))


def test_sigma2_tends_to_decrease_with_added_edges():
    """Densifying a graph should not slow Metropolis mixing, as a tendency.

    Strict monotonicity is false: recomputing Metropolis weights after adding
    an edge raises two degrees and shrinks every incident weight, which can
    increase sigma_2 (observed on ~30% of random single-edge additions).  The
    sanity check therefore asserts the statistical form plus the exact
    endpoint: the complete graph always wins.
    """
    decreases = 0
    worst_increase = 0.0
    for k in range(50):
        g = rng(35, k)
        graph = gen_er(12, 0.3, g)
        before = metropolis_weights(graph).sigma2
        non_edges = [(i, j) for i in range(12) for j in range(i + 1, 12)
                     if (i, j) not in graph.edges]
        if not non_edges:
            decreases += 1
            continue
        i, j = non_edges[g.integers(len(non_edges))]
        denser = Graph(12, graph.edges | {(i, j)})
        after = metropolis_weights(denser).sigma2
        if after <= before + 1e-12:
            decreases += 1
        worst_increase = max(worst_increase, after - before)
        full = metropolis_weights(gen_complete(12)).sigma2
        assert full <= min(before, after) + 1e-12
    assert decreases >= 30
    assert worst_increase < 0.02


def test_mixing_csv_roundtrip(tmp_path):
    mm = metropolis_weights(gen_er(9, 0.5, rng(36)))
    path = tmp_path / "W.csv"
    save_mixing_csv(path, mm)
    loaded = load_mixing_csv(path)
    np.testing.assert_array_equal(loaded.W, mm.W)
    assert loaded.sigma2 == mm.sigma2
    assert loaded.graph.edges == mm.graph.edges


def test_mixing_matrix_validates_on_construction():
    with pytest.raises(AssumptionViolation):
        MixingMatrix(np.eye(3))   # disconnected: sigma2 = 1
