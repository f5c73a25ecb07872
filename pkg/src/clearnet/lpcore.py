"""Dense linear programming.

The embedded solver is a two-phase primal simplex on a full tableau. Dantzig's
rule is used until a run of degenerate pivots is observed, after which Bland's
rule takes over for the rest of the phase (anti-cycling).

Problems have the form::

    min/max  cᵀx
    s.t.     G x <= h
             E x == f
             lb <= x <= ub        (entries may be infinite)

Dual sign convention. Multipliers are reported for the problem rewritten as a
minimisation of ``c_min`` (``c`` for min, ``-c`` for max) with Lagrangian

    c_minᵀx + μᵀ(Gx - h) + νᵀ(Ex - f) - ρ_lᵀ(x - lb) + ρ_uᵀ(x - ub)

so ``μ >= 0`` for every ``<=`` row in both senses, ``ν`` is free and the
bound multipliers ``ρ_l, ρ_u >= 0``. Stationarity reads
``c_min + Gᵀμ + Eᵀν - ρ_l + ρ_u = 0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure

FEAS_TOL = 1e-8
GAP_TOL = 1e-7
PIVOT_TOL = 1e-11
OPT_TOL = 1e-10
BLAND_AFTER = 30


class LpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class LpProblem:
    c: np.ndarray
    G: np.ndarray | None = None
    h: np.ndarray | None = None
    E: np.ndarray | None = None
    f: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    sense: str = "min"

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        k = self.c.size
        if not np.all(np.isfinite(self.c)):
            raise ValueError("cost vector must be finite")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        self.G, self.h = _rows(self.G, self.h, k, "inequality")
        self.E, self.f = _rows(self.E, self.f, k, "equality")
        self.lb = np.zeros(k) if self.lb is None else np.broadcast_to(
            np.asarray(self.lb, dtype=float), (k,)).copy()
        self.ub = np.full(k, np.inf) if self.ub is None else np.broadcast_to(
            np.asarray(self.ub, dtype=float), (k,)).copy()
        if np.any(self.lb == np.inf) or np.any(self.ub == -np.inf):
            raise ValueError("invalid variable bounds")

    @property
    def num_vars(self) -> int:
        return self.c.size


def _rows(M, rhs, k, what):
    if M is None:
        return np.zeros((0, k)), np.zeros(0)
    M = np.asarray(M, dtype=float).reshape(-1, k)
    rhs = np.asarray(rhs, dtype=float).reshape(-1)
    if rhs.shape[0] != M.shape[0]:
        raise ValueError(f"{what} rows and right-hand side differ in length")
    return M, rhs


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float | None = None
    ineq_duals: np.ndarray | None = None
    eq_duals: np.ndarray | None = None
    lower_duals: np.ndarray | None = None
    upper_duals: np.ndarray | None = None
    iterations: int = 0
    degenerate: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    def dual_objective(self, problem: LpProblem) -> float:
        """Dual objective in the original sense (equals ``objective`` at optimality)."""
        lb = np.where(np.isfinite(problem.lb), problem.lb, 0.0)
        ub = np.where(np.isfinite(problem.ub), problem.ub, 0.0)
        val = (-problem.h @ self.ineq_duals - problem.f @ self.eq_duals
               + lb @ self.lower_duals - ub @ self.upper_duals)
        return -val if problem.sense == "max" else val


class _Tableau:
    """Full simplex tableau with the reduced-cost row stored last."""

    def __init__(self, A, b, basis):
        rows, cols = A.shape
        self.T = np.zeros((rows + 1, cols + 1))
        self.T[:rows, :cols] = A
        self.T[:rows, -1] = b
        self.basis = list(basis)
        self.pivots = 0
        self.degenerate_pivots = 0

    def set_objective(self, cost):
        self.T[-1, :-1] = cost
        self.T[-1, -1] = 0.0
        for r, j in enumerate(self.basis):
            if self.T[-1, j] != 0.0:
                self.T[-1] -= self.T[-1, j] * self.T[r]

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j
        self.pivots += 1

    def run(self, allowed, max_pivots):
        """Optimise the current objective row. Returns 'optimal' or 'unbounded'."""
        T = self.T
        rows = T.shape[0] - 1
        bland = False
        stall = 0
        while True:
            red = T[-1, :-1]
            cand = np.flatnonzero(allowed & (red < -OPT_TOL))
            if cand.size == 0:
                return "optimal"
            j = int(cand[0]) if bland else int(cand[np.argmin(red[cand])])
            col = T[:rows, j]
            pos = col > PIVOT_TOL
            if not pos.any():
                return "unbounded"
            ratios = np.full(rows, np.inf)
            ratios[pos] = T[:rows, -1][pos] / col[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
            if bland:
                r = int(min(ties, key=lambda t: self.basis[t]))
            else:
                r = int(ties[np.argmax(col[ties])])
            degenerate = T[r, -1] <= 1e-12
            self.pivot(r, j)
            if degenerate:
                self.degenerate_pivots += 1
                stall += 1
                if stall >= BLAND_AFTER:
                    bland = True
            else:
                stall = 0
            if self.pivots > max_pivots:
                raise NumericalFailure(f"simplex did not terminate after {self.pivots} pivots")


def _standard_form(prob: LpProblem):
    """Rewrite bounds so every variable is nonnegative: x = offset + M y."""
    k = prob.num_vars
    cols = []
    offset = np.zeros(k)
    box = []  # (std column, width) for doubly bounded variables
    for j in range(k):
        lo, hi = prob.lb[j], prob.ub[j]
        if np.isfinite(lo):
            offset[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                box.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    M = np.zeros((k, len(cols)))
    for s, (j, sgn) in enumerate(cols):
        M[j, s] = sgn
    return offset, M, box


def solve_lp(problem: LpProblem, max_pivots: int | None = None) -> LpSolution:
    """Solve ``problem`` with the embedded two-phase simplex."""
    prob = problem
    if np.any(prob.lb > prob.ub):
        return LpSolution(status=LpStatus.INFEASIBLE)
    c_min = prob.c if prob.sense == "min" else -prob.c
    offset, M, box = _standard_form(prob)
    ny = M.shape[1]

    G = prob.G @ M
    h = prob.h - prob.G @ offset
    E = prob.E @ M
    f = prob.f - prob.E @ offset
    Bx = np.zeros((len(box), ny))
    bx = np.zeros(len(box))
    for r, (s, width) in enumerate(box):
        Bx[r, s] = 1.0
        bx[r] = width
    ineq = np.vstack([G, Bx])
    ineq_rhs = np.concatenate([h, bx])
    mi, me = ineq.shape[0], E.shape[0]
    rows = mi + me

    # columns: y (ny) | slacks (mi) | artificials
    A = np.zeros((rows, ny + mi))
    A[:mi, :ny] = ineq
    A[:mi, ny:] = np.eye(mi)
    A[mi:, :ny] = E
    b = np.concatenate([ineq_rhs, f])
    flip = b < 0
    A[flip] *= -1.0
    b = np.abs(b)
    row_sign = np.where(flip, -1.0, 1.0)

    needs_art = [r for r in range(rows) if r >= mi or flip[r]]
    n_art = len(needs_art)
    full = np.zeros((rows, ny + mi + n_art))
    full[:, : ny + mi] = A
    basis = [ny + r for r in range(rows)]
    unit_col = [ny + r for r in range(rows)]  # column carrying +e_r, for dual read-out
    for a, r in enumerate(needs_art):
        full[r, ny + mi + a] = 1.0
        basis[r] = ny + mi + a
        unit_col[r] = ny + mi + a
    ncols = full.shape[1]
    is_art = np.zeros(ncols, dtype=bool)
    is_art[ny + mi:] = True

    tab = _Tableau(full, b, basis)
    limit = max_pivots or 50 * (rows + ncols) + 1000
    scale = 1.0 + (np.abs(b).max() if b.size else 0.0)

    if n_art:
        tab.set_objective(is_art.astype(float))
        tab.run(np.ones(ncols, dtype=bool), limit)
        if -tab.T[-1, -1] > FEAS_TOL * scale:
            return LpSolution(status=LpStatus.INFEASIBLE, iterations=tab.pivots)
        # drive zero-level artificials out of the basis; rows where that is
        # impossible are redundant and keep their artificial at zero forever
        for r in range(rows):
            if is_art[tab.basis[r]]:
                row = tab.T[r, :-1].copy()
                row[is_art] = 0.0
                j = int(np.argmax(np.abs(row)))
                if abs(row[j]) > 1e-9:
                    tab.T[r, -1] = 0.0
                    tab.pivot(r, j)

    cost = np.zeros(ncols)
    cost[:ny] = M.T @ c_min
    tab.set_objective(cost)
    allowed = ~is_art
    outcome = tab.run(allowed, limit)
    if outcome == "unbounded":
        return LpSolution(status=LpStatus.UNBOUNDED, iterations=tab.pivots)

    # recompute primal and dual values from the final basis to shed drift
    basis = tab.basis
    Bmat = full[:, basis]
    try:
        xb = np.linalg.solve(Bmat, b)
        y = np.linalg.solve(Bmat.T, cost[basis])
    except np.linalg.LinAlgError:
        xb = tab.T[:rows, -1].copy()
        y = -tab.T[-1, unit_col] + cost[unit_col]
    z = np.zeros(ncols)
    z[basis] = xb
    ystd = z[:ny]
    x = offset + M @ np.clip(ystd, 0.0, None)
    x = np.clip(x, prob.lb, prob.ub)

    y_orig = row_sign * y
    mu = -y_orig[: prob.G.shape[0]]
    nu = -y_orig[mi:]
    mu = np.maximum(mu, 0.0)
    red = c_min + prob.G.T @ mu + prob.E.T @ nu
    lower = np.where(np.isfinite(prob.lb), np.maximum(red, 0.0), 0.0)
    upper = np.where(np.isfinite(prob.ub), np.maximum(-red, 0.0), 0.0)
    obj = float(prob.c @ x)
    degenerate = bool(np.any(xb <= 1e-12)) and rows > 0
    return LpSolution(
        status=LpStatus.OPTIMAL, x=x, objective=obj,
        ineq_duals=mu, eq_duals=nu, lower_duals=lower, upper_duals=upper,
        iterations=tab.pivots, degenerate=degenerate,
    )


def kkt_residuals(problem: LpProblem, sol: LpSolution) -> dict:
    """Primal feasibility, stationarity, complementarity and gap of an optimal solution."""
    p = problem
    x = sol.x
    c_min = p.c if p.sense == "min" else -p.c
    viol = [0.0]
    if p.G.shape[0]:
        viol.append(float(np.max(p.G @ x - p.h)))
    if p.E.shape[0]:
        viol.append(float(np.max(np.abs(p.E @ x - p.f))))
    viol.append(float(np.max(np.where(np.isfinite(p.lb), p.lb - x, -np.inf), initial=0.0)))
    viol.append(float(np.max(np.where(np.isfinite(p.ub), x - p.ub, -np.inf), initial=0.0)))
    stat = c_min + p.G.T @ sol.ineq_duals + p.E.T @ sol.eq_duals - sol.lower_duals + sol.upper_duals
    comp = [0.0]
    if p.G.shape[0]:
        comp.append(float(np.max(np.abs(sol.ineq_duals * (p.G @ x - p.h)))))
    fl = np.isfinite(p.lb)
    fu = np.isfinite(p.ub)
    if fl.any():
        comp.append(float(np.max(np.abs(sol.lower_duals[fl] * (x[fl] - p.lb[fl])))))
    if fu.any():
        comp.append(float(np.max(np.abs(sol.upper_duals[fu] * (x[fu] - p.ub[fu])))))
    return {
        "primal": max(viol),
        "stationarity": float(np.max(np.abs(stat), initial=0.0)),
        "complementarity": max(comp),
        "gap": abs(sol.objective - sol.dual_objective(problem)),
    }


def solve_lp_highs(problem: LpProblem) -> LpSolution:
    """Alternative backend through scipy's HiGHS; used for cross-checks only."""
    from scipy.optimize import linprog

    p = problem
    c_min = p.c if p.sense == "min" else -p.c
    bounds = [(None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
              for lo, hi in zip(p.lb, p.ub)]
    res = linprog(
        c_min,
        A_ub=p.G if p.G.shape[0] else None, b_ub=p.h if p.G.shape[0] else None,
        A_eq=p.E if p.E.shape[0] else None, b_eq=p.f if p.E.shape[0] else None,
        bounds=bounds, method="highs",
    )
    if res.status == 2:
        return LpSolution(status=LpStatus.INFEASIBLE)
    if res.status == 3:
        return LpSolution(status=LpStatus.UNBOUNDED)
    if res.status != 0:
        raise NumericalFailure(res.message)
    mu = -res.ineqlin.marginals if p.G.shape[0] else np.zeros(0)
    nu = -res.eqlin.marginals if p.E.shape[0] else np.zeros(0)
    return LpSolution(
        status=LpStatus.OPTIMAL, x=res.x, objective=float(p.c @ res.x),
        ineq_duals=mu, eq_duals=nu,
        lower_duals=res.lower.marginals, upper_duals=-res.upper.marginals,
    )


def matrix_rank(M, rel_tol: float = 1e-8) -> int:
    """Number of singular values above ``rel_tol`` times the largest one."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))
