import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clearnet import fixtures as fx
from clearnet.errors import EpsilonExceedsBound, EpsilonOutOfRange, TooManyVertices
from clearnet.lpcore import solve_lp_highs
from clearnet.model import FinancialNetwork
from clearnet.resilience import default_margin, insolvency_margin
from clearnet.worstcase import (
    Uniqueness,
    ball_vertices,
    dual_lp,
    oracle_scan,
    uniqueness_check,
    worst_case_loss,
    worst_case_loss_l1,
    worst_case_loss_linf,
    worst_case_oracle,
)

from conftest import interesting_networks


def test_toy_linf_examples(toy):
    rep = worst_case_loss_linf(toy, 1.5)
    assert rep.eta_wc == pytest.approx(0.5)
    np.testing.assert_allclose(rep.delta_wc.delta, [-1.5])
    assert worst_case_loss_linf(toy, 1.0).eta_wc == pytest.approx(0.0, abs=1e-12)
    top = worst_case_loss_linf(toy, 2.0)
    assert top.eta_wc == pytest.approx(1.0)
    np.testing.assert_allclose(top.delta_wc.delta, [-2.0])
    np.testing.assert_allclose(top.clearing_at_wc.payments, [0, 0], atol=1e-12)


def test_toy2_l1_example(toy2):
    rep = worst_case_loss_l1(toy2, 1.0)
    assert rep.eta_wc == pytest.approx(0.5)
    assert np.count_nonzero(rep.delta_wc.delta) == 1
    assert rep.delta_wc.delta.min() == pytest.approx(-1.0)
    assert rep.i_star == 0
    assert rep.maximizers == [0, 1]


def test_single_asset_norms_agree(toy):
    a = worst_case_loss(toy, 1.5, "l1")
    b = worst_case_loss(toy, 1.5, "linf")
    assert a.eta_wc == pytest.approx(b.eta_wc)
    np.testing.assert_allclose(a.delta_wc.delta, b.delta_wc.delta)


@pytest.mark.parametrize("norm", ["l1", "linf"])
def test_zero_below_margin(toy2, norm):
    eps_star = default_margin(toy2, norm).epsilon_star
    for eps in (0.0, 0.5 * eps_star, eps_star):
        assert worst_case_loss(toy2, eps, norm).eta_wc == pytest.approx(0.0, abs=1e-8)


def test_radius_checks(toy):
    with pytest.raises(EpsilonExceedsBound):
        worst_case_loss(toy, 2.5, "linf")
    with pytest.raises(EpsilonOutOfRange):
        worst_case_loss(toy, -0.1, "l1")


def test_oracle_examples(toy, toy2):
    assert worst_case_oracle(toy, 1.5, "linf") == pytest.approx(0.5)
    scan = oracle_scan(toy2, 1.0, "l1")
    assert scan.vertices.shape == (4, 2)
    assert scan.eta == pytest.approx(0.5)
    assert scan.argmax == [0, 2]
    below = oracle_scan(toy2, 0.2, "linf")
    assert np.all(below.losses == 0)


def test_oracle_vertex_limit():
    with pytest.raises(TooManyVertices):
        ball_vertices(13, 1.0, "linf")
    assert ball_vertices(13, 1.0, "l1").shape == (26, 13)


def test_dual_lp_matches_highs(toy2):
    prob = dual_lp(toy2, toy2.nominal_inflow - 0.5 * toy2.asset_shares.sum(axis=1))
    ref = solve_lp_highs(prob)
    value = worst_case_loss_linf(toy2, 0.5).eta_wc
    assert value == pytest.approx(ref.objective + toy2.debts.sum(), abs=1e-9)


def test_mixed_sign_column_exact():
    # bank 0 is long asset 0, bank 1 is short it; a uniform-sign formula would
    # miss the scenario that hurts the short seller
    P = np.array([[0, 0, 2.0], [0, 0, 3.0], [0, 0, 0]])
    S = np.array([[2.0], [-1.5], [0.0]])
    net = FinancialNetwork(("a", "b", "c"), P, [1.0, 3.0, 0], [0, 0, 0], S, [1.0])
    for norm in ("l1", "linf"):
        ub = insolvency_margin(net, norm)
        for eps in np.linspace(0, ub, 7)[1:]:
            rep = worst_case_loss(net, eps, norm)
            assert rep.eta_wc == pytest.approx(worst_case_oracle(net, eps, norm), abs=1e-8)


def check_instance(net, norm):
    eps_star = default_margin(net, norm).epsilon_star
    eps_ub = insolvency_margin(net, norm)
    grid = eps_star + (eps_ub - eps_star) * np.array([0.1, 0.3, 0.55, 0.8, 1.0])
    prev = 0.0
    for eps in grid:
        rep = worst_case_loss(net, eps, norm, eps_ub=eps_ub)
        oracle = oracle_scan(net, eps, norm)
        assert abs(rep.eta_wc - oracle.eta) <= 1e-6
        assert abs(rep.clearing_at_wc.loss - rep.eta_wc) <= 1e-6
        assert abs(rep.delta_wc.magnitude - eps) <= 1e-9 * max(1.0, eps)
        assert rep.eta_wc >= prev - 1e-9
        prev = rep.eta_wc


@pytest.mark.parametrize("k", range(15))
def test_oracle_equivalence(k):
    net = interesting_networks(200 + k, 1, n_range=(2, 9), m_range=(1, 6), short_every=3)[0]
    for norm in ("linf", "l1"):
        check_instance(net, norm)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_convex_and_nested(seed, a, b):
    net = interesting_networks(seed, 1, n_range=(2, 7), m_range=(1, 5))[0]
    ub = insolvency_margin(net, "linf")
    e1, e2 = sorted((a * ub, b * ub))
    f = lambda e: worst_case_loss(net, e, "linf", eps_ub=ub).eta_wc  # noqa: E731
    assert f(e1) <= f(e2) + 1e-9
    assert f(0.5 * (e1 + e2)) <= 0.5 * (f(e1) + f(e2)) + 1e-7
    # the ℓ1 ball sits inside the ℓ∞ ball of the same radius
    assert worst_case_loss(net, e2, "l1").eta_wc <= f(e2) + 1e-9


def test_uniqueness_examples(toy, toy2):
    rep = uniqueness_check(toy, 1.5, "linf")
    assert rep.unique is Uniqueness.UNIQUE
    assert rep.rank_FZ == rep.columns
    assert rep.iota_star == 0.0
    rep = uniqueness_check(toy2, 1.0, "l1")
    assert rep.unique is Uniqueness.NOT_UNIQUE
    assert rep.condition_flags["single_max_index"] is False


def test_uniqueness_range(toy):
    with pytest.raises(EpsilonOutOfRange):
        uniqueness_check(toy, 1.0, "linf")
    with pytest.raises(EpsilonOutOfRange):
        uniqueness_check(toy, 2.5, "linf")


def test_toy_at_insolvency_edge_not_certified(toy):
    # at ε_ub the clearing vector is p = 0 and the dual optimum is not unique
    rep = uniqueness_check(toy, 2.0, "linf")
    assert rep.unique is Uniqueness.NOT_UNIQUE
    assert rep.iota_star == np.inf


def test_toy2_linf_is_unique(toy2):
    # under ℓ∞ both assets simply drop together, so the scenario is unique
    assert uniqueness_check(toy2, 0.5, "linf").unique is Uniqueness.UNIQUE


@pytest.mark.parametrize("k", range(15))
def test_unique_implies_single_vertex(k):
    net = interesting_networks(900 + k, 1, n_range=(2, 8), m_range=(1, 5))[0]
    for norm in ("linf", "l1"):
        eps_star = default_margin(net, norm).epsilon_star
        eps_ub = insolvency_margin(net, norm)
        for t in (0.3, 0.7):
            eps = eps_star + t * (eps_ub - eps_star)
            rep = worst_case_loss(net, eps, norm, eps_ub=eps_ub)
            u = uniqueness_check(net, eps, norm, report=rep)
            if u.unique is Uniqueness.UNIQUE:
                scan = oracle_scan(net, eps, norm)
                assert len(scan.argmax) == 1
                np.testing.assert_allclose(scan.vertices[scan.argmax[0]], rep.delta_wc.delta, atol=1e-9)
