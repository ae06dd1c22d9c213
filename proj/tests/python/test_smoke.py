import numpy as np
import pytest

import windpool as wp


def test_structure_matrix_and_coherence():
    h = wp.Hierarchy([10.0, 20.0])
    g = wp.structure_matrix(h)
    assert g.shape == (3, 2)
    np.testing.assert_array_equal(g, [[1, 1], [1, 0], [0, 1]])

    assert wp.is_coherent(np.array([10.0, 4.0, 6.0]), 1e-9)
    assert not wp.is_coherent(np.array([10.0, 4.0, 5.0]), 1e-9)
    out = wp.aggregate_bottom(np.array([4.0, 6.0]))
    np.testing.assert_array_equal(out, [10.0, 4.0, 6.0])


def test_energy_score_hand_example():
    scenarios = np.array([[0.0, 0.0], [2.0, 0.0]])
    obs = np.array([1.0, 0.0])
    res = wp.energy_score(scenarios, obs)
    assert res.value == pytest.approx(0.5)
    assert res.accuracy == pytest.approx(1.0)
    assert res.spread == pytest.approx(0.5)

    grad = wp.energy_score_subgradient(np.array([[0.0], [2.0]]), np.array([1.0]))
    np.testing.assert_allclose(grad, [[-0.25], [0.25]])


def test_market_offer_and_duals():
    prices = wp.PriceTriple(pi_f=25.0, psi_plus=4.0, psi_minus=12.0)
    assert wp.critical_ratio(prices) == 0.25
    assert wp.quantile_offer([10.0, 20.0], prices) == 10.0

    sol = wp.solve_offer([10.0, 20.0], prices, 100.0)
    assert sol.offer == 10.0
    assert sol.expected_cost == pytest.approx(20.0)
    np.testing.assert_allclose(sol.duals, [-4.0, 4.0])

    assert wp.realized_cost(10.0, 14.0, prices) == pytest.approx(16.0)
    assert wp.independent_profit(10.0, 14.0, prices) == pytest.approx(334.0)


def test_allocation_in_core():
    prices = wp.PriceTriple(25.0, 4.0, 12.0)
    bottom = np.array([[4.0, 6.0], [8.0, 12.0]])
    sol = wp.solve_offer([10.0, 20.0], prices, 100.0)
    alloc = wp.expected_allocation(bottom, sol.duals, np.array([10.0, 20.0]))
    np.testing.assert_allclose(alloc.a, [8.0, 12.0])

    audit = wp.audit_core(alloc, prices, [50.0, 50.0])
    assert audit["is_core"]
    assert audit["worst_violation"] <= 1e-6

    shares = wp.expost_shares(alloc, 10.0)
    np.testing.assert_allclose(shares, [4.0, 6.0])
    assert wp.cooperative_profit(10.0, 4.0, prices) == pytest.approx(246.0)
    assert wp.characteristic_value([0], bottom, prices, [50.0, 50.0]) == pytest.approx(8.0)


def test_rank_machinery():
    rng_ranks = [
        wp.multivariate_rank(np.array([[10.0], [20.0]]), np.array([0.0]), seed=s)
        for s in range(1, 50)
    ]
    assert all(1 <= r <= 2 for r in rng_ranks)

    depths = wp.band_depth_prerank(np.array([[1.0], [2.0], [3.0]]), seed=3)
    np.testing.assert_allclose(depths, [0.0, 1.0, 0.0])

    lower, upper = wp.consistency_band(4, 200, level=0.95, n_sim=200, seed=1)
    assert len(lower) == 5 and len(upper) == 5
    assert all(lo <= hi for lo, hi in zip(lower, upper))

    assert wp.deviation_from_uniform([25, 25, 25, 25]) == 0.0
    assert wp.deviation_from_uniform([100, 0]) == pytest.approx(1.0)
    assert wp.chi_square_uniform_pvalue([48, 52, 50, 50]) > 0.9


def test_reconciler_coherence_and_roundtrip(tmp_path):
    h = wp.Hierarchy([10.0, 10.0])
    bu = wp.Reconciler.bottom_up(h)
    out = bu.apply(np.array([999.0, 4.0, 6.0]))
    np.testing.assert_array_equal(out, [10.0, 4.0, 6.0])

    zero = wp.Reconciler.nonparametric_zero(h)
    np.testing.assert_allclose(zero.apply(np.array([999.0, 4.0, 6.0])), [10.0, 4.0, 6.0])

    path = str(tmp_path / "reconciler.json")
    zero.save(path)
    back = wp.Reconciler.load(path)
    assert back.kind == "nonparametric"

    wrong = wp.Hierarchy([10.0, 11.0])
    ident = wp.Reconciler.projection_identity(wrong)
    ident.save(str(tmp_path / "other.json"))
    loaded = wp.Reconciler.load(str(tmp_path / "other.json"))
    assert loaded.kind == "projection"


def test_truth_sampler_determinism():
    spec = wp.SyntheticSpec()
    spec.m = 3
    spec.seed = 7
    a = wp.TruthSampler(spec)
    b = wp.TruthSampler(spec)
    np.testing.assert_array_equal(a.draw(), b.draw())


def test_errors_are_python_exceptions():
    with pytest.raises(ValueError):
        wp.critical_ratio(wp.PriceTriple(25.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        wp.Hierarchy([])
