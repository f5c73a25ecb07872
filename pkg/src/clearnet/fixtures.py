"""Small reference networks and seeded random instances for tests and demos."""

from __future__ import annotations

import numpy as np

from .model import FinancialNetwork, pro_rata_matrix


def _net(P, cin, cout, S, v, names=None):
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    return FinancialNetwork(
        node_names=tuple(names or (f"b{i}" for i in range(n))),
        liabilities=P,
        external_inflows=cin,
        external_outflows=cout,
        asset_shares=np.asarray(S, dtype=float).reshape(n, -1),
        nominal_prices=v,
    )


def toy() -> FinancialNetwork:
    """Bank 0 owes bank 1 one unit and holds one share of a unit-priced asset."""
    return _net([[0, 1], [0, 0]], [1, 0], [0, 0], [[1], [0]], [1])


def toy2() -> FinancialNetwork:
    """Like ``toy`` but the exposure is split over two identical assets."""
    return _net([[0, 1], [0, 0]], [0.5, 0], [0, 0], [[1, 1], [0, 0]], [0.5, 0.5])


def ring3(c=(0.0, 0.0, 0.0)) -> FinancialNetwork:
    """Three banks in a cycle, each owing the next one unit; no assets."""
    c = np.asarray(c, dtype=float)
    P = [[0, 1, 0], [0, 0, 1], [1, 0, 0]]
    return _net(P, np.maximum(c, 0), np.maximum(-c, 0), np.zeros((3, 0)), [])


# external flows and share matrix of an 8-bank, 4-asset reference case;
# interbank liabilities and prices are supplied by the caller
EIGHT_BANK_INFLOWS = [158, 38, 15, 285, 25, 180, 60, 55]
EIGHT_BANK_OUTFLOWS = [180, 100, 0, 145, 0, 50, 20, 60]
EIGHT_BANK_SHARES = [
    [96, 99, 29, 57],
    [53, 75, 13, 15],
    [0, 28, 0, 0],
    [32, 79, 0, 0],
    [0, 0, 21, 0],
    [0, 45, 27, 71],
    [0, 0, 49, 0],
    [75, 79, 5, 41],
]


def eight_bank(liabilities=None, prices=None) -> FinancialNetwork:
    P = np.zeros((8, 8)) if liabilities is None else liabilities
    v = np.ones(4) if prices is None else prices
    return _net(P, EIGHT_BANK_INFLOWS, EIGHT_BANK_OUTFLOWS, EIGHT_BANK_SHARES, v)


def random_network(rng: np.random.Generator, n: int, m: int, density: float = 0.4,
                   short_fraction: float = 0.0, margin_scale: float = 0.2,
                   exposure_density: float = 0.7) -> FinancialNetwork:
    """Random network that satisfies the no-nominal-default condition.

    Nominal net worth is drawn as a fraction of each bank's asset value so the
    default margin is a modest fraction of the prices.
    """
    P = rng.uniform(0.5, 10.0, size=(n, n)) * (rng.random((n, n)) < density)
    np.fill_diagonal(P, 0.0)
    S = rng.uniform(1.0, 10.0, size=(n, m)) * (rng.random((n, m)) < exposure_density)
    if short_fraction > 0:
        S *= np.where(rng.random((n, m)) < short_fraction, -1.0, 1.0)
    v = rng.uniform(0.5, 2.0, size=m)
    pbar = P.sum(axis=1)
    A = pro_rata_matrix(P)
    worth = margin_scale * (np.abs(S) @ v) * rng.uniform(0.2, 1.0, size=n) + rng.uniform(0.05, 0.5, size=n)
    # c̄ = worth - (Aᵀ - I) p̄  and  cᵉ = c̄ - S v
    ce = worth - (A.T @ pbar - pbar) - S @ v
    return _net(P, np.maximum(ce, 0), np.maximum(-ce, 0), S, v)


def random_feasible_inflow(net: FinancialNetwork, rng: np.random.Generator,
                           slack_scale: float = 0.5) -> np.ndarray:
    """An inflow for which the clearing LP is feasible, typically with defaults."""
    p0 = net.debts * rng.uniform(0.0, 1.0, size=net.n)
    slack = rng.exponential(slack_scale, size=net.n) * (rng.random(net.n) < 0.6)
    return p0 - net.pro_rata.T @ p0 + slack
