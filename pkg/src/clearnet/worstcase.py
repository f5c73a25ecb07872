"""Worst-case system loss over a ball of price perturbations.

The loss at a fixed inflow is the clearing LP's optimal value; its LP dual is

    max_{β,λ >= 0}  (1 - β)ᵀp̄ - cᵀλ     s.t.  β - 1 + (I - A)λ >= 0.

Maximising over ``c = c̄ + Sδ`` with ``‖δ‖ <= ε`` adds ``ε ‖Sᵀλ‖_*``. For the
ℓ∞ ball that term is ``ε Σ_j |ζ_jᵀλ|`` and for the ℓ1 ball ``ε max_j |ζ_jᵀλ|``
(``ζ_j`` is column ``j`` of ``S``). When a column has entries of one sign,
``|ζ_jᵀλ| = |ζ_j|ᵀλ`` because ``λ >= 0``, and the problem is one LP (ℓ∞) or
``m`` LPs (ℓ1). Columns mixing long and short positions break that identity;
for those both signs are tried explicitly, which keeps every subproblem an LP
and the result exact.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from .clearing import ClearingResult, loss_lp, max_clearing_lp
from .errors import (
    ConsistencyFailure,
    EpsilonExceedsBound,
    EpsilonOutOfRange,
    InsolventToExternal,
    NumericalFailure,
    TooManyVertices,
)
from .lpcore import LpProblem, LpStatus, matrix_rank, solve_lp
from .model import FinancialNetwork, NormKind, PricePerturbation
from .resilience import default_margin, insolvency_margin

CONSISTENCY_TOL = 1e-5
ZERO_SIGN_TOL = 1e-10
TIE_TOL = 1e-9
MULTIPLIER_TOL = 1e-8
RANK_RTOL = 1e-8
MAX_ORACLE_DIM = 12
MAX_SIGN_PATTERNS = 16


@dataclass(frozen=True)
class WorstCaseReport:
    epsilon: float
    norm: NormKind
    eta_wc: float
    beta_star: np.ndarray
    lambda_star: np.ndarray
    i_star: int | None
    delta_wc: PricePerturbation
    clearing_at_wc: ClearingResult
    c_wc: np.ndarray
    candidates: list = field(default_factory=list)
    maximizers: list = field(default_factory=list)


def _column_signs(S: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Sign making each column nonnegative, and the columns that mix signs."""
    signs = np.ones(S.shape[1])
    mixed = []
    for j in range(S.shape[1]):
        col = S[:, j]
        if np.all(col >= 0):
            continue
        if np.all(col <= 0):
            signs[j] = -1.0
        else:
            mixed.append(j)
    return signs, mixed


def dual_lp(net: FinancialNetwork, q) -> LpProblem:
    """``max (1-β)ᵀp̄ - qᵀλ`` over the dual-feasible set, without the constant ``1ᵀp̄``."""
    n = net.n
    I = np.eye(n)
    return LpProblem(
        c=np.r_[-net.debts, -np.asarray(q, dtype=float)],
        G=np.hstack([-I, -(I - net.pro_rata)]),
        h=-np.ones(n),
        lb=np.zeros(2 * n),
        sense="max",
    )


def _solve_dual(net, q):
    sol = solve_lp(dual_lp(net, q))
    if sol.status is LpStatus.UNBOUNDED:
        raise EpsilonExceedsBound("worst-case LP is unbounded: the ball reaches insolvent inflows")
    if sol.status is not LpStatus.OPTIMAL:
        raise NumericalFailure(f"worst-case LP returned {sol.status.value}")
    n = net.n
    value = float(sol.objective + net.debts.sum())
    return value, sol.x[:n].copy(), sol.x[n:].copy()


def _check_radius(net, eps, norm, eps_ub):
    if eps < 0 or not np.isfinite(eps):
        raise EpsilonOutOfRange(f"epsilon must be finite and nonnegative, got {eps}")
    if eps_ub is None:
        eps_ub = insolvency_margin(net, norm)
    if eps > eps_ub * (1 + 1e-9) + 1e-12:
        raise EpsilonExceedsBound(f"epsilon {eps} exceeds the insolvency margin {eps_ub}")
    return eps_ub


def _sign_or_down(x):
    return np.where(np.abs(x) <= ZERO_SIGN_TOL, 1.0, np.sign(x))


def _finish(net, eps, norm, value, beta, lam, delta, q, i_star, candidates, maximizers):
    pert = PricePerturbation.from_delta(delta, norm)
    c = net.nominal_inflow + net.asset_shares @ delta
    try:
        res = max_clearing_lp(net, c)
    except InsolventToExternal as exc:
        raise ConsistencyFailure(f"worst-case scenario is insolvent: {exc}") from None
    if abs(res.loss - value) > CONSISTENCY_TOL * (1 + abs(value)):
        raise ConsistencyFailure(
            f"loss at the extracted scenario ({res.loss}) differs from the dual value ({value})"
        )
    for a in (beta, lam, q):
        a.setflags(write=False)
    return WorstCaseReport(
        epsilon=float(eps), norm=norm, eta_wc=value, beta_star=beta, lambda_star=lam,
        i_star=i_star, delta_wc=pert, clearing_at_wc=res, c_wc=q,
        candidates=candidates, maximizers=maximizers,
    )


def worst_case_loss_linf(net: FinancialNetwork, epsilon: float, eps_ub: float | None = None) -> WorstCaseReport:
    norm = NormKind.LINF
    eps = float(epsilon)
    _check_radius(net, eps, norm, eps_ub)
    S = net.asset_shares
    signs, mixed = _column_signs(S)
    if len(mixed) > MAX_SIGN_PATTERNS:
        raise TooManyVertices(f"{len(mixed)} mixed-sign asset columns")
    candidates = []
    best = None
    for pattern in itertools.product((1.0, -1.0), repeat=len(mixed)):
        t = signs.copy()
        t[mixed] = pattern
        q = net.nominal_inflow - eps * (S @ t)
        value, beta, lam = _solve_dual(net, q)
        candidates.append({"signs": t.tolist(), "value": value})
        if best is None or value > best[0] + TIE_TOL:
            best = (value, beta, lam, q)
    value, beta, lam, q = best
    maximizers = [k for k, cand in enumerate(candidates) if cand["value"] >= value - TIE_TOL]
    delta = -eps * _sign_or_down(S.T @ lam)
    return _finish(net, eps, norm, value, beta, lam, delta, q, None, candidates, maximizers)


def worst_case_loss_l1(net: FinancialNetwork, epsilon: float, eps_ub: float | None = None) -> WorstCaseReport:
    norm = NormKind.L1
    eps = float(epsilon)
    _check_radius(net, eps, norm, eps_ub)
    S = net.asset_shares
    signs, mixed = _column_signs(S)
    candidates = []
    best = None
    for j in range(net.m):
        for t in ((1.0, -1.0) if j in mixed else (signs[j],)):
            q = net.nominal_inflow - eps * t * S[:, j]
            value, beta, lam = _solve_dual(net, q)
            candidates.append({"asset": j, "sign": t, "value": value})
            if best is None or value > best[0] + TIE_TOL:
                best = (value, beta, lam, q, j)
    if best is None:
        # no assets: the ball is a single point
        value, beta, lam = _solve_dual(net, net.nominal_inflow)
        q = net.nominal_inflow.copy()
        return _finish(net, eps, norm, value, beta, lam, np.zeros(0), q, None, [], [])
    value, beta, lam, q, i_star = best
    maximizers = sorted({cand["asset"] for cand in candidates if cand["value"] >= value - TIE_TOL})
    delta = np.zeros(net.m)
    delta[i_star] = -eps * _sign_or_down(S[:, i_star] @ lam)
    return _finish(net, eps, norm, value, beta, lam, delta, q, i_star, candidates, maximizers)


def worst_case_loss(net: FinancialNetwork, epsilon: float, norm, eps_ub: float | None = None) -> WorstCaseReport:
    norm = NormKind.parse(norm)
    if norm is NormKind.LINF:
        return worst_case_loss_linf(net, epsilon, eps_ub)
    return worst_case_loss_l1(net, epsilon, eps_ub)


@dataclass(frozen=True)
class OracleScan:
    eta: float
    vertices: np.ndarray
    losses: np.ndarray
    argmax: list
    infeasible: list


def ball_vertices(m: int, epsilon: float, norm) -> np.ndarray:
    norm = NormKind.parse(norm)
    if m == 0:
        return np.zeros((1, 0))
    if norm is NormKind.LINF:
        if m > MAX_ORACLE_DIM:
            raise TooManyVertices(f"2^{m} vertices exceed the enumeration limit")
        return epsilon * np.array(list(itertools.product((-1.0, 1.0), repeat=m)))
    eye = np.eye(m)
    return epsilon * np.vstack([s * eye[j] for j in range(m) for s in (-1.0, 1.0)])


def oracle_scan(net: FinancialNetwork, epsilon: float, norm, rtol: float = 1e-7) -> OracleScan:
    """Evaluate the clearing loss at every vertex of the perturbation ball.

    The loss is convex in the inflow, so its maximum over the ball sits at a
    vertex. Infeasible vertices (insolvent inflows) are listed separately.
    """
    V = ball_vertices(net.m, float(epsilon), norm)
    C = net.nominal_inflow + V @ net.asset_shares.T
    losses = np.array([loss_lp(net, c) for c in C])
    infeasible = np.flatnonzero(~np.isfinite(losses)).tolist()
    finite = losses[np.isfinite(losses)]
    eta = float(finite.max()) if finite.size else np.nan
    argmax = np.flatnonzero(np.isfinite(losses) & (losses >= eta - rtol * (1 + abs(eta)))).tolist()
    return OracleScan(eta, V, losses, argmax, infeasible)


def worst_case_oracle(net: FinancialNetwork, epsilon: float, norm) -> float:
    return oracle_scan(net, epsilon, norm).eta


class Uniqueness(enum.Enum):
    UNIQUE = "Unique"
    NOT_UNIQUE = "NotUnique"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class UniquenessReport:
    unique: Uniqueness
    rank_FZ: int | None
    columns: int | None
    iota_star: float | None
    condition_flags: dict
    ambiguous: bool = False


def _verdict(flags, ambiguous):
    if all(flags.values()):
        return Uniqueness.UNIQUE
    others_ok = all(v for k, v in flags.items() if k != "lp_unique")
    if not flags.get("lp_unique", True) and others_ok and ambiguous:
        return Uniqueness.INCONCLUSIVE
    return Uniqueness.NOT_UNIQUE


def lp_uniqueness(net: FinancialNetwork, q, beta, lam):
    """Test whether ``(β, λ)`` is the only optimum of the dual LP with cost ``q``.

    Sink banks (no interbank debt) contribute a free ``β_i >= 1`` with zero
    cost; those coordinates never affect the scenario, so they are removed
    before the rank / auxiliary-LP test.
    Returns ``(unique, rank, columns, iota, ambiguous)``.
    """
    n = net.n
    keep = np.flatnonzero(~net.sinks)
    k = keep.size
    IA = np.eye(n) - net.pro_rata
    F = np.zeros((2 * k + n, k + n))
    F[:k, :k] = np.eye(k)
    F[:k, k:] = IA[keep]
    F[k:2 * k, :k] = np.eye(k)
    F[2 * k:, k:] = np.eye(n)
    g = np.r_[np.ones(k), np.zeros(k + n)]
    x = np.r_[np.asarray(beta)[keep], np.asarray(lam)]

    clearing = max_clearing_lp(net, q)
    p = clearing.payments
    v = net.debts - p
    w = np.asarray(q) - IA.T @ p
    mult = np.r_[p[keep], v[keep], w]

    slack = F @ x - g
    act_tol = 1e-9 * (1 + np.abs(x).max(initial=0.0))
    Z = np.abs(slack) <= act_tol
    U = Z & (mult > MULTIPLIER_TOL)
    L = Z & ~U
    ambiguous = bool(np.any(Z & (mult > MULTIPLIER_TOL * 1e-3) & (mult <= MULTIPLIER_TOL))
                     or np.any(~Z & (np.abs(slack) <= 1e-6 * (1 + np.abs(x).max(initial=0.0)))))

    cols = k + n
    rank = matrix_rank(F[Z], RANK_RTOL) if Z.any() else 0
    if not L.any():
        iota = 0.0
    else:
        FL, FU = F[L], F[U]
        aux = LpProblem(
            c=FL.sum(axis=0), G=-FL, h=np.zeros(FL.shape[0]),
            E=FU if FU.shape[0] else None, f=np.zeros(FU.shape[0]) if FU.shape[0] else None,
            lb=np.full(cols, -np.inf), ub=np.full(cols, np.inf), sense="max",
        )
        sol = solve_lp(aux)
        if sol.status is LpStatus.UNBOUNDED:
            iota = np.inf
        elif sol.status is LpStatus.OPTIMAL:
            iota = float(sol.objective)
            if abs(iota) <= 1e-9:
                iota = 0.0
        else:
            raise NumericalFailure("auxiliary uniqueness LP is infeasible at the origin")
    unique = rank == cols and iota == 0.0
    return unique, rank, cols, iota, ambiguous


def uniqueness_check(net: FinancialNetwork, epsilon: float, norm,
                     report: WorstCaseReport | None = None) -> UniquenessReport:
    """Certificate that the worst-case perturbation is the only one.

    ``NotUnique`` means the sufficient conditions fail decisively;
    ``Inconclusive`` means they fail only through the LP-uniqueness test and
    the active set or multiplier split sits within numerical noise.
    """
    norm = NormKind.parse(norm)
    eps = float(epsilon)
    eps_star = default_margin(net, norm).epsilon_star
    eps_ub = insolvency_margin(net, norm)
    if not (eps > eps_star and eps <= eps_ub * (1 + 1e-9) + 1e-12):
        raise EpsilonOutOfRange(f"epsilon must lie in ({eps_star}, {eps_ub}], got {eps}")
    wc = report if report is not None else worst_case_loss(net, eps, norm, eps_ub)
    lam = wc.lambda_star
    zeta_lam = net.asset_shares.T @ lam

    flags = {}
    if norm is NormKind.L1:
        winners = [c for c in wc.candidates if c["value"] >= wc.eta_wc - TIE_TOL]
        flags["single_max_index"] = len(winners) == 1
        if not flags["single_max_index"]:
            return UniquenessReport(Uniqueness.NOT_UNIQUE, None, None, None,
                                    {**flags, "lp_unique": None, "single_argmax_zeta": None})
    elif len(wc.candidates) > 1:
        winners = [c for c in wc.candidates if c["value"] >= wc.eta_wc - TIE_TOL]
        flags["single_sign_pattern"] = len(winners) == 1

    unique, rank, cols, iota, ambiguous = lp_uniqueness(net, wc.c_wc, wc.beta_star, lam)
    flags["lp_unique"] = unique
    if norm is NormKind.L1:
        mag = np.abs(zeta_lam)
        top = mag.max(initial=0.0)
        flags["single_argmax_zeta"] = int(np.count_nonzero(mag >= top - TIE_TOL * (1 + top))) == 1
    else:
        flags["nonzero_zeta"] = bool(np.all(np.abs(zeta_lam) > ZERO_SIGN_TOL))
    return UniquenessReport(_verdict(flags, ambiguous), rank, cols, iota, flags, ambiguous)
