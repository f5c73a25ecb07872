"""Clearing vectors under limited liability, debt priority and pro-rata sharing.

A clearing vector solves ``p = min(p̄, (c + Aᵀp)⁺)``. Two routes are provided:
monotone fixed-point iteration of that map (from ``p̄`` down to the maximal
solution, or from ``0`` up to the minimal one) and the linear program
``min 1ᵀ(p̄ - p)  s.t. 0 <= p <= p̄, c + Aᵀp >= p`` whose unique optimum is the
maximal clearing vector whenever it is feasible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsolventToExternal, MaxIterExceeded, OutOfRange
from .lpcore import LpProblem, LpStatus, solve_lp
from .model import FinancialNetwork

DEFAULT_TOL = 1e-10
DEFAULT_FLAG_TOL = 1e-9


@dataclass(frozen=True)
class ClearingResult:
    payments: np.ndarray
    residuals: np.ndarray
    defaulted: np.ndarray
    insolvent: np.ndarray
    loss: float
    method: str
    iterations: int = 0
    converged: bool = True

    @property
    def defaults(self) -> list[int]:
        return np.flatnonzero(self.defaulted).tolist()

    def fixed_point_residual(self, net: FinancialNetwork, c) -> float:
        return float(np.max(np.abs(self.payments - clearing_map(net, c, self.payments)), initial=0.0))


def _as_inflow(net: FinancialNetwork, c) -> np.ndarray:
    c = np.asarray(c, dtype=float).reshape(-1)
    if c.shape != (net.n,):
        raise ValueError(f"inflow vector must have length {net.n}")
    return c


def clearing_map(net: FinancialNetwork, c, p) -> np.ndarray:
    """One application of ``p -> min(p̄, (c + Aᵀp)⁺)``."""
    pbar = net.debts
    out = np.minimum(pbar, np.maximum(c + net.pro_rata.T @ p, 0.0))
    return np.clip(out, 0.0, pbar)


def system_loss(net: FinancialNetwork, p, tol: float = 1e-9) -> float:
    p = np.asarray(p, dtype=float)
    if np.any(p < -tol) or np.any(p > net.debts + tol):
        raise OutOfRange("payments must lie between 0 and the nominal debts")
    return float(np.sum(net.debts - p))


def make_result(net: FinancialNetwork, c, p, method: str, iterations: int = 0,
                converged: bool = True, flag_tol: float = DEFAULT_FLAG_TOL) -> ClearingResult:
    p = np.clip(np.asarray(p, dtype=float), 0.0, net.debts)
    d = c + net.pro_rata.T @ p
    owes = net.debts > 0
    defaulted = owes & (p < net.debts - flag_tol)
    insolvent = (d < -flag_tol) & (p <= flag_tol)
    for a in (p, d, defaulted, insolvent):
        a.setflags(write=False)
    return ClearingResult(
        payments=p, residuals=d, defaulted=defaulted, insolvent=insolvent,
        loss=float(np.sum(net.debts - p)), method=method,
        iterations=iterations, converged=converged,
    )


def default_max_iter(net: FinancialNetwork) -> int:
    arcs = int(np.count_nonzero(net.liabilities))
    return 10 * net.n * arcs + 100


def _regime(net, c, p):
    # 0: pays nothing, 1: pays its residual, 2: pays in full (sinks count as 0)
    z = c + net.pro_rata.T @ p
    pbar = net.debts
    return np.where(pbar == 0, 0, np.where(z >= pbar, 2, np.where(z <= 0, 0, 1)))


def _regime_jump(net, c, p, descending, max_doublings=60):
    """Advance the iteration by the largest power of two that stays in one regime.

    Inside a fixed regime the clearing map is the monotone affine map
    ``x -> b + J x``. The iterates from ``p`` are monotone, so if ``p`` and the
    ``2^s``-th iterate lie in the same regime every iterate in between does too,
    and the jump lands exactly on a point of the plain sequence.
    """
    cls = _regime(net, c, p)
    part = cls == 1
    J = net.pro_rata.T * part[:, None]
    b = np.where(cls == 2, net.debts, 0.0) + np.where(part, c, 0.0)
    best = None
    Jn, bn = J, b
    for _ in range(max_doublings):
        Jn, bn = Jn @ Jn, Jn @ bn + bn
        x = np.clip(bn + Jn @ p, 0.0, net.debts)
        ordered = np.all(x <= p + 1e-12) if descending else np.all(x >= p - 1e-12)
        if not ordered or not np.array_equal(_regime(net, c, x), cls):
            break
        if best is not None and np.max(np.abs(x - best), initial=0.0) == 0.0:
            break
        best = x
    return best


def _iterate(net, c, start, method, tol, max_iter, strict, accelerate):
    c = _as_inflow(net, c)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = default_max_iter(net)
    descending = method == "IterMax"
    p = start
    k = 0
    while k < max_iter:
        nxt = clearing_map(net, c, p)
        k += 1
        step = np.max(np.abs(nxt - p), initial=0.0)
        p = nxt
        if step <= tol:
            return make_result(net, c, p, method, iterations=k)
        if accelerate and k < max_iter:
            jump = _regime_jump(net, c, p, descending)
            if jump is not None and np.max(np.abs(jump - p), initial=0.0) > 0.0:
                p = jump
                k += 1
    res = make_result(net, c, p, method, iterations=k, converged=False)
    if strict:
        raise MaxIterExceeded(f"no convergence after {max_iter} iterations", res)
    return res


def max_clearing_iterative(net: FinancialNetwork, c, tol: float = DEFAULT_TOL,
                           max_iter: int | None = None, strict: bool = False,
                           accelerate: bool = True) -> ClearingResult:
    """Iterate the clearing map from ``p̄``; the iterates decrease to the maximal vector.

    With ``accelerate`` runs of iterations that stay inside one payment regime
    are skipped exactly (see ``_regime_jump``); each jump counts as one iteration.
    """
    return _iterate(net, c, net.debts.copy(), "IterMax", tol, max_iter, strict, accelerate)


def min_clearing_iterative(net: FinancialNetwork, c, tol: float = DEFAULT_TOL,
                           max_iter: int | None = None, strict: bool = False,
                           accelerate: bool = True) -> ClearingResult:
    """Iterate the clearing map from ``0``; the iterates increase to the minimal vector."""
    return _iterate(net, c, np.zeros(net.n), "IterMin", tol, max_iter, strict, accelerate)


def clearing_lp(net: FinancialNetwork, c) -> LpProblem:
    # min 1ᵀ(p̄ - p)  <=>  min -1ᵀp ;  (I - Aᵀ) p <= c
    n = net.n
    return LpProblem(
        c=-np.ones(n),
        G=np.eye(n) - net.pro_rata.T,
        h=np.asarray(c, dtype=float),
        lb=np.zeros(n),
        ub=net.debts,
    )


def loss_lp(net: FinancialNetwork, c) -> float:
    """Optimal loss of the clearing LP, ``inf`` when it is infeasible."""
    sol = solve_lp(clearing_lp(net, _as_inflow(net, c)))
    if sol.status is LpStatus.INFEASIBLE:
        return np.inf
    return float(np.sum(net.debts - np.clip(sol.x, 0.0, net.debts)))


def max_clearing_lp(net: FinancialNetwork, c) -> ClearingResult:
    """Maximal clearing vector through the LP.

    Raises ``InsolventToExternal`` when the LP is infeasible; the exception's
    ``result`` is the iterative maximal clearing vector with insolvent banks
    flagged.
    """
    c = _as_inflow(net, c)
    sol = solve_lp(clearing_lp(net, c))
    if sol.status is LpStatus.INFEASIBLE:
        fallback = max_clearing_iterative(net, c)
        bad = np.flatnonzero(fallback.insolvent).tolist()
        raise InsolventToExternal(
            f"clearing LP infeasible: banks {bad} cannot cover their external liabilities",
            fallback,
        )
    return make_result(net, c, sol.x, "LP", iterations=sol.iterations)


def clear(net: FinancialNetwork, c, method: str = "lp", **kw) -> ClearingResult:
    method = method.lower()
    if method == "lp":
        return max_clearing_lp(net, c)
    if method in ("iter-max", "itermax"):
        return max_clearing_iterative(net, c, **kw)
    if method in ("iter-min", "itermin"):
        return min_clearing_iterative(net, c, **kw)
    raise ValueError(f"unknown clearing method {method!r}")
