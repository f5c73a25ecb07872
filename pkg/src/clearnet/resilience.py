"""Default and insolvency resilience margins.

The default margin is the largest perturbation radius under which every bank
keeps nonnegative net worth at full interbank payment. It has a closed form:
the smallest ratio of nominal net worth to the dual norm of the bank's
exposure row. The insolvency margin is the largest radius for which one
payment vector keeps every bank's external obligations covered for all
perturbations in the ball, found by a single LP.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleAtZero, NumericalFailure
from .lpcore import LpProblem, LpStatus, solve_lp
from .model import FinancialNetwork, NormKind, PricePerturbation, require_nominal_solvency

TIE_RTOL = 1e-9


@dataclass(frozen=True)
class MarginReport:
    epsilon_star: float
    norm: NormKind
    critical_banks: list
    critical_assets: dict = field(default_factory=dict)
    witness: PricePerturbation | None = None
    slack: np.ndarray | None = None
    exposure: np.ndarray | None = None


def dual_norm_rows(net: FinancialNetwork, norm) -> np.ndarray:
    """``s_i``: dual norm of bank ``i``'s exposure row (ℓ∞ ↔ ℓ1)."""
    return NormKind.parse(norm).dual.rowwise(net.asset_shares)


def _near(values, target):
    return np.abs(values - target) <= TIE_RTOL * max(abs(target), 1e-300)


def default_margin(net: FinancialNetwork, norm, allow_boundary: bool = False) -> MarginReport:
    norm = NormKind.parse(norm)
    r = require_nominal_solvency(net, allow_boundary=allow_boundary)
    s = dual_norm_rows(net, norm)
    exposed = s > 0
    if not exposed.any():
        return MarginReport(np.inf, norm, [], {}, None, r, s)
    ratios = np.full(net.n, np.inf)
    ratios[exposed] = r[exposed] / s[exposed]
    eps = float(ratios.min())
    critical = np.flatnonzero(exposed & _near(ratios, eps)).tolist()

    S = net.asset_shares
    assets = {}
    for i in critical:
        row = np.abs(S[i])
        assets[i] = np.flatnonzero(_near(row, row.max())).tolist()

    i0 = critical[0]
    delta = np.zeros(net.m)
    if norm is NormKind.LINF:
        delta = -eps * np.sign(S[i0])
    else:
        J = assets[i0]
        delta[J] = -eps / len(J) * np.sign(S[i0, J])
    return MarginReport(eps, norm, critical, assets, PricePerturbation.from_delta(delta, norm), r, s)


def insolvency_lp(net: FinancialNetwork, norm) -> LpProblem:
    # variables (p, ε): max ε  s.t. (I - Aᵀ)p + ε s <= c̄, 0 <= p <= p̄, ε >= 0
    n = net.n
    s = dual_norm_rows(net, norm)
    G = np.hstack([np.eye(n) - net.pro_rata.T, s[:, None]])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    return LpProblem(
        c=c, G=G, h=net.nominal_inflow,
        lb=np.zeros(n + 1), ub=np.r_[net.debts, np.inf], sense="max",
    )


def insolvency_margin(net: FinancialNetwork, norm) -> float:
    """Largest ε for which a single payment vector keeps the clearing LP feasible."""
    sol = solve_lp(insolvency_lp(net, norm))
    if sol.status is LpStatus.UNBOUNDED:
        return np.inf
    if sol.status is LpStatus.INFEASIBLE:
        raise InfeasibleAtZero("clearing LP is infeasible already at nominal prices")
    if sol.objective is None:
        raise NumericalFailure("insolvency LP returned no objective")
    return float(sol.x[-1])


def relative_level(net: FinancialNetwork, eps: float, norm) -> float | None:
    """``ε / ‖v̄‖`` in the same norm, or ``None`` when the prices are all zero."""
    scale = NormKind.parse(norm)(net.nominal_prices)
    if scale == 0 or not np.isfinite(eps):
        return None
    return eps / scale
