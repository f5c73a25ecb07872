import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clearnet import fixtures as fx
from clearnet.clearing import loss_lp
from clearnet.errors import EpsilonOutOfRange
from clearnet.model import FinancialNetwork
from clearnet.experiments import (
    CSV_HEADER,
    kink_report,
    loss_curve,
    random_shock,
    sweep_grid,
    thread_count,
)

from conftest import interesting_networks


def test_toy_curve_no_runs(toy):
    curve = loss_curve(toy, "linf", grid_points=4, runs=0)
    np.testing.assert_allclose(curve.grid, [1, 4 / 3, 5 / 3, 2])
    np.testing.assert_allclose(curve.eta_wc, [0, 1 / 3, 2 / 3, 1], atol=1e-12)
    assert all(p.rand_min is None for p in curve.points)


def test_toy_random_losses_equal_worst_case(toy):
    curve = loss_curve(toy, "l1", grid_points=5, runs=50, seed=3)
    for p in curve.points:
        assert p.runs == 50
        assert p.rand_min == pytest.approx(p.eta_wc, abs=1e-9)
        assert p.rand_max == pytest.approx(p.eta_wc, abs=1e-9)


def test_below_prefix_is_zero(toy2):
    curve = loss_curve(toy2, "l1", grid_points=3, runs=4, below=4)
    assert curve.grid[0] == 0.0
    assert curve.points[0].runs == 0
    assert np.all(curve.eta_wc[:5] == pytest.approx(0.0, abs=1e-12))
    assert np.all(np.diff(curve.grid) > 0)


def test_no_exposure_rejected():
    with pytest.raises(EpsilonOutOfRange):
        loss_curve(fx.ring3([1.0, 1.0, 1.0]), "linf")


def test_sweep_grid():
    np.testing.assert_allclose(sweep_grid(1.0, 2.0, 3), [1.0, 1.5, 2.0])
    np.testing.assert_allclose(sweep_grid(1.0, 2.0, 2, below=2), [0.0, 0.5, 1.0, 2.0])
    with pytest.raises(ValueError):
        sweep_grid(0.0, 1.0, 1)


def test_random_shock_examples():
    rng = np.random.default_rng(0)
    assert random_shock(1, "l1", 0.7, rng).delta.tolist() == [-0.7]
    assert random_shock(1, "linf", 0.7, rng).delta.tolist() == [-0.7]
    with pytest.raises(EpsilonOutOfRange):
        random_shock(3, "l1", 0.0, rng)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12), st.floats(1e-3, 1e3), st.integers(0, 2**32 - 1))
def test_random_shock_properties(m, eps, seed):
    rng = np.random.default_rng(seed)
    d1 = random_shock(m, "l1", eps, rng).delta
    assert np.all(d1 <= 0)
    assert abs(d1.sum() + eps) <= 1e-12 * max(1.0, eps)
    d2 = random_shock(m, "linf", eps, rng).delta
    assert np.all(d2 <= 0)
    assert d2.min() == -eps


def test_curve_invariants_random():
    for net in interesting_networks(42, 4, n_range=(2, 7), m_range=(2, 5)):
        for norm in ("l1", "linf"):
            curve = loss_curve(net, norm, grid_points=6, runs=20, seed=1, below=2)
            eta = curve.eta_wc
            assert np.all(np.diff(eta) >= -1e-9)
            assert np.all(np.abs(eta[curve.grid <= curve.epsilon_star]) <= 1e-8)
            for p in curve.points:
                if p.runs:
                    assert max(p.random_losses) <= p.eta_wc + 1e-6
                    assert min(p.random_losses) >= -1e-9


def test_dominance_with_direct_clearing(toy2):
    curve = loss_curve(toy2, "linf", grid_points=4, runs=10, seed=9)
    rng = np.random.default_rng([9, 2, 0])
    d = random_shock(2, "linf", curve.points[2].epsilon, rng).delta
    loss = loss_lp(toy2, toy2.nominal_inflow + toy2.asset_shares @ d)
    assert loss == curve.points[2].random_losses[0]


def test_deterministic_and_thread_independent(toy2):
    net = interesting_networks(5, 1, n_range=(3, 6), m_range=(2, 4))[0]
    a = loss_curve(net, "l1", grid_points=5, runs=12, seed=7, threads=1)
    b = loss_curve(net, "l1", grid_points=5, runs=12, seed=7, threads=4)
    assert a == b
    assert a.to_csv() == b.to_csv()
    c = loss_curve(net, "l1", grid_points=5, runs=12, seed=8, threads=1)
    assert c.to_csv() != a.to_csv()


def test_csv_format(toy):
    text = loss_curve(toy, "linf", grid_points=2, runs=1).to_csv()
    lines = text.split("\n")
    assert lines[0] == CSV_HEADER
    assert "\r" not in text and text.endswith("\n")
    assert lines[1] == "1,0,,0,0,0"
    assert lines[2] == "2,1,,1,1,1"
    l1 = loss_curve(toy, "l1", grid_points=2, runs=0).to_csv().split("\n")
    assert l1[1] == "1,0,0,,,"


def test_thread_count(monkeypatch):
    monkeypatch.setenv("CLEARNET_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("CLEARNET_THREADS", "0")
    assert thread_count() >= 1


def test_kink_report():
    # banks 0 and 1 owe the sink bank 2; asset 0 hurts bank 0 first, asset 1
    # hurts bank 1 three times as fast, so the worst asset switches at ε = 0.4
    P = np.array([[0, 0, 10.0], [0, 0, 10.0], [0, 0, 0]])
    S = np.array([[1.0, 0], [0, 3.0], [0, 0]])
    net = FinancialNetwork(("a", "b", "s"), P, [9.1, 7.9, 1.0], [0, 0, 0], S, [1.0, 1.0])
    curve = loss_curve(net, "l1", grid_points=20, runs=0)
    assert curve.epsilon_star == pytest.approx(0.1)
    eps = curve.grid
    k = int(np.searchsorted(eps, 0.4))
    np.testing.assert_allclose(curve.eta_wc, np.maximum(eps - 0.1, 3 * eps - 0.9), atol=1e-9)
    rep = kink_report(curve)
    assert rep["i_star_changes"] == [k]
    # the kink sits inside the segment between grid points k-1 and k
    assert rep["slope_changes"] == [k - 1, k]
