"""Loss-curve sweeps with a random-shock baseline."""

from __future__ import annotations

import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .clearing import loss_lp
from .errors import EpsilonOutOfRange
from .model import FinancialNetwork, NormKind, PricePerturbation
from .resilience import default_margin, insolvency_margin
from .worstcase import worst_case_loss

CSV_HEADER = "epsilon,eta_wc,i_star,rand_min,rand_mean,rand_max"


@dataclass(frozen=True)
class CurvePoint:
    epsilon: float
    eta_wc: float
    i_star: int | None
    rand_min: float | None
    rand_mean: float | None
    rand_max: float | None
    runs: int
    random_losses: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class LossCurve:
    norm: NormKind
    epsilon_star: float
    epsilon_ub: float
    seed: int
    points: tuple

    @property
    def grid(self) -> np.ndarray:
        return np.array([p.epsilon for p in self.points])

    @property
    def eta_wc(self) -> np.ndarray:
        return np.array([p.eta_wc for p in self.points])

    @property
    def i_star(self) -> list:
        return [p.i_star for p in self.points]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for p in self.points:
            cells = [p.epsilon, p.eta_wc, p.i_star, p.rand_min, p.rand_mean, p.rand_max]
            buf.write(",".join(_fmt(x) for x in cells) + "\n")
        return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def random_shock(m: int, norm, epsilon: float, rng: np.random.Generator) -> PricePerturbation:
    """Nonpositive price move of exact norm ``epsilon``.

    ℓ1: ``-ε w`` with ``w`` uniform on the simplex (sorted-uniform spacings).
    ℓ∞: one uniformly chosen asset drops by ``ε``, the others uniformly in ``[-ε, 0]``.
    """
    norm = NormKind.parse(norm)
    if epsilon <= 0:
        raise EpsilonOutOfRange("epsilon must be positive")
    if m == 1:
        return PricePerturbation.from_delta([-epsilon], norm)
    if norm is NormKind.L1:
        cuts = np.sort(rng.random(m - 1))
        w = np.diff(np.r_[0.0, cuts, 1.0])
        delta = -epsilon * w
    else:
        delta = -epsilon * rng.random(m)
        delta[rng.integers(m)] = -epsilon
    return PricePerturbation.from_delta(delta, norm)


def sweep_grid(eps_star: float, eps_ub: float, points: int, below: int = 0) -> np.ndarray:
    if points < 2:
        raise ValueError("grid needs at least two points")
    main = np.linspace(eps_star, eps_ub, points)
    if below <= 0:
        return main
    return np.r_[np.linspace(0.0, eps_star, below + 1)[:-1], main]


def thread_count() -> int:
    raw = os.environ.get("CLEARNET_THREADS", "0").strip() or "0"
    k = int(raw)
    return (os.cpu_count() or 1) if k <= 0 else k


def _point(net, norm, eps, eps_ub, runs, seed, index):
    wc = worst_case_loss(net, eps, norm, eps_ub=eps_ub)
    losses = []
    if eps > 0:
        for r in range(runs):
            rng = np.random.default_rng([seed, index, r])
            shock = random_shock(net.m, norm, eps, rng)
            losses.append(loss_lp(net, net.nominal_inflow + net.asset_shares @ shock.delta))
    stats = (min(losses), float(np.mean(losses)), max(losses)) if losses else (None, None, None)
    return CurvePoint(
        epsilon=float(eps), eta_wc=wc.eta_wc,
        i_star=wc.i_star if norm is NormKind.L1 else None,
        rand_min=stats[0], rand_mean=stats[1], rand_max=stats[2],
        runs=len(losses), random_losses=tuple(losses),
    )


def loss_curve(net: FinancialNetwork, norm, grid_points: int = 20, runs: int = 150,
               seed: int = 0, below: int = 0, threads: int | None = None) -> LossCurve:
    """Worst-case loss on an even grid over ``[ε*, ε_ub]`` plus random-shock statistics.

    Every draw uses its own generator seeded by ``(seed, grid index, run)``,
    so the output does not depend on the number of threads.
    """
    norm = NormKind.parse(norm)
    if runs < 0:
        raise ValueError("runs must be nonnegative")
    eps_star = default_margin(net, norm).epsilon_star
    eps_ub = insolvency_margin(net, norm)
    if not np.isfinite(eps_star):
        raise EpsilonOutOfRange("network has no asset exposure; the loss curve is identically zero")
    eps_star = min(eps_star, eps_ub)
    grid = np.clip(sweep_grid(eps_star, eps_ub, grid_points, below), 0.0, eps_ub)
    workers = threads if threads is not None else thread_count()
    args = [(net, norm, float(e), eps_ub, runs, seed, k) for k, e in enumerate(grid)]
    if workers <= 1:
        points = [_point(*a) for a in args]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(lambda a: _point(*a), args))
    return LossCurve(norm, eps_star, eps_ub, seed, tuple(points))


def kink_report(curve: LossCurve, rtol: float = 1e-6) -> dict:
    """Grid intervals where the slope changes and where the critical asset changes."""
    eps, eta = curve.grid, curve.eta_wc
    slopes = np.diff(eta) / np.where(np.diff(eps) > 0, np.diff(eps), np.nan)
    scale = 1 + np.nanmax(np.abs(slopes), initial=0.0)
    slope_changes = [k for k in range(1, len(slopes))
                     if abs(slopes[k] - slopes[k - 1]) > rtol * scale]
    istar = curve.i_star
    # every asset ties while the loss is still zero, so those points carry no signal
    live = eta > rtol * (1 + np.abs(eta).max(initial=0.0))
    switches = [k for k in range(1, len(istar))
                if live[k - 1] and live[k] and istar[k] != istar[k - 1]]
    return {"slope_changes": slope_changes, "i_star_changes": switches}
