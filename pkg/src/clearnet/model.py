"""Financial network model: liabilities, external flows and asset exposures.

Indices are 0-based throughout. A network is immutable once built; all derived
quantities (debts, pro-rata matrix, nominal inflow) are computed at
construction and stored as read-only arrays.
"""

from __future__ import annotations

import enum
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import jsonschema
import numpy as np

from .errors import (
    DimensionMismatch,
    NegativeLiability,
    NegativeValue,
    NominalDefault,
    NonzeroDiagonal,
    SchemaError,
)

STOCHASTIC_TOL = 1e-12


class NormKind(enum.Enum):
    L1 = "l1"
    LINF = "linf"

    @property
    def dual(self) -> "NormKind":
        return NormKind.LINF if self is NormKind.L1 else NormKind.L1

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return 0.0
        if self is NormKind.L1:
            return float(np.abs(x).sum())
        return float(np.abs(x).max())

    def rowwise(self, M) -> np.ndarray:
        """Norm of every row of ``M``."""
        M = np.asarray(M, dtype=float)
        if M.shape[1] == 0:
            return np.zeros(M.shape[0])
        if self is NormKind.L1:
            return np.abs(M).sum(axis=1)
        return np.abs(M).max(axis=1)

    @classmethod
    def parse(cls, value: "str | NormKind") -> "NormKind":
        if isinstance(value, NormKind):
            return value
        key = str(value).strip().lower().replace("_", "")
        aliases = {"l1": cls.L1, "1": cls.L1, "linf": cls.LINF, "inf": cls.LINF, "l∞": cls.LINF}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown norm {value!r}; expected 'l1' or 'linf'") from None


@dataclass(frozen=True)
class PricePerturbation:
    delta: np.ndarray
    norm: NormKind
    magnitude: float

    @classmethod
    def from_delta(cls, delta, norm: NormKind) -> "PricePerturbation":
        delta = _readonly(np.asarray(delta, dtype=float).copy())
        return cls(delta=delta, norm=norm, magnitude=norm(delta))


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def pro_rata_matrix(liabilities: np.ndarray) -> np.ndarray:
    """Row-stochastic matrix of relative liabilities; sinks get a unit diagonal."""
    P = np.asarray(liabilities, dtype=float)
    n = P.shape[0]
    debts = P.sum(axis=1)
    A = np.zeros((n, n))
    owing = debts > 0
    A[owing] = P[owing] / debts[owing, None]
    sinks = np.flatnonzero(~owing)
    A[sinks, sinks] = 1.0
    # push rounding residue onto the largest entry so each row sums to 1
    for i in np.flatnonzero(owing):
        err = 1.0 - A[i].sum()
        if err != 0.0:
            A[i, np.argmax(A[i])] += err
    return A


@dataclass(frozen=True)
class FinancialNetwork:
    node_names: tuple
    liabilities: np.ndarray
    external_inflows: np.ndarray
    external_outflows: np.ndarray
    asset_shares: np.ndarray
    nominal_prices: np.ndarray
    debts: np.ndarray = field(init=False, repr=False)
    pro_rata: np.ndarray = field(init=False, repr=False)
    external_net: np.ndarray = field(init=False, repr=False)
    nominal_inflow: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        P = np.array(self.liabilities, dtype=float, ndmin=2)
        n = len(self.node_names)
        if P.shape != (n, n):
            raise DimensionMismatch(f"liabilities must be {n}x{n}, got {P.shape}")
        cin = np.array(self.external_inflows, dtype=float).reshape(-1)
        cout = np.array(self.external_outflows, dtype=float).reshape(-1)
        if cin.shape != (n,) or cout.shape != (n,):
            raise DimensionMismatch(
                f"external flows must have length {n}, got {cin.shape[0]} and {cout.shape[0]}"
            )
        v = np.array(self.nominal_prices, dtype=float).reshape(-1)
        m = v.shape[0]
        S = np.array(self.asset_shares, dtype=float)
        if S.size == 0 and m == 0:
            S = np.zeros((n, 0))
        if S.ndim != 2 or S.shape != (n, m):
            raise DimensionMismatch(f"asset_shares must be {n}x{m}, got {S.shape}")
        for name, arr in (("liabilities", P), ("external flows", np.r_[cin, cout]),
                          ("asset_shares", S), ("nominal_prices", v)):
            if not np.all(np.isfinite(arr)):
                raise SchemaError(f"{name} contain non-finite values")
        if np.any(P < 0):
            i, j = np.argwhere(P < 0)[0]
            raise NegativeLiability(f"liability {i}->{j} is negative ({P[i, j]})")
        if np.any(np.diag(P) != 0):
            i = int(np.flatnonzero(np.diag(P))[0])
            raise NonzeroDiagonal(f"bank {i} owes itself {P[i, i]}")
        if np.any(cin < 0) or np.any(cout < 0):
            raise NegativeValue("external inflows and outflows must be nonnegative")
        if np.any(v < 0):
            raise NegativeValue("nominal prices must be nonnegative")

        A = pro_rata_matrix(P)
        ce = cin - cout
        setattr_ = object.__setattr__
        setattr_(self, "node_names", tuple(str(x) for x in self.node_names))
        setattr_(self, "liabilities", _readonly(P))
        setattr_(self, "external_inflows", _readonly(cin))
        setattr_(self, "external_outflows", _readonly(cout))
        setattr_(self, "asset_shares", _readonly(S))
        setattr_(self, "nominal_prices", _readonly(v))
        setattr_(self, "debts", _readonly(P.sum(axis=1)))
        setattr_(self, "pro_rata", _readonly(A))
        setattr_(self, "external_net", _readonly(ce))
        setattr_(self, "nominal_inflow", _readonly(ce + S @ v))

    @property
    def n(self) -> int:
        return len(self.node_names)

    @property
    def m(self) -> int:
        return self.nominal_prices.shape[0]

    @property
    def sinks(self) -> np.ndarray:
        return self.debts == 0

    def sigma(self, i: int) -> np.ndarray:
        """Exposure row of bank ``i``."""
        return self.asset_shares[i]

    def zeta(self, j: int) -> np.ndarray:
        """Holders column of asset ``j``."""
        return self.asset_shares[:, j]

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.node_names),
            "liabilities": self.liabilities.tolist(),
            "external_inflows": self.external_inflows.tolist(),
            "external_outflows": self.external_outflows.tolist(),
            "asset_shares": self.asset_shares.tolist(),
            "nominal_prices": self.nominal_prices.tolist(),
        }


_number_array = {"type": "array", "items": {"type": "number"}}
NETWORK_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": [
        "nodes", "liabilities", "external_inflows",
        "external_outflows", "asset_shares", "nominal_prices",
    ],
    "properties": {
        "nodes": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "liabilities": {"type": "array", "items": _number_array},
        "external_inflows": _number_array,
        "external_outflows": _number_array,
        "asset_shares": {"type": "array", "items": _number_array},
        "nominal_prices": _number_array,
    },
}


def build_network(raw: Mapping[str, Any]) -> FinancialNetwork:
    """Validate a parsed JSON record and build the network from it."""
    try:
        jsonschema.validate(raw, NETWORK_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{where}: {exc.message}") from None
    n = len(raw["nodes"])
    if len(set(raw["nodes"])) != n:
        raise SchemaError("node names must be unique")
    rows = raw["liabilities"]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise DimensionMismatch(f"liabilities must be {n}x{n}")
    shares = raw["asset_shares"]
    m = len(raw["nominal_prices"])
    if len(shares) != n or any(len(r) != m for r in shares):
        raise DimensionMismatch(f"asset_shares must be {n}x{m}")
    return FinancialNetwork(
        node_names=tuple(raw["nodes"]),
        liabilities=np.array(rows, dtype=float).reshape(n, n),
        external_inflows=raw["external_inflows"],
        external_outflows=raw["external_outflows"],
        asset_shares=np.array(shares, dtype=float).reshape(n, m),
        nominal_prices=raw["nominal_prices"],
    )


def load_network(path: "str | Path") -> FinancialNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from None
    return build_network(raw)


def nominal_inflow(net: FinancialNetwork) -> np.ndarray:
    return net.nominal_inflow.copy()


def nominal_slack(net: FinancialNetwork) -> np.ndarray:
    """Nominal net worth of every bank: c̄ + (Aᵀ - I) p̄."""
    return net.nominal_inflow + net.pro_rata.T @ net.debts - net.debts


def check_nominal_solvency(net: FinancialNetwork) -> tuple[bool, np.ndarray]:
    """Return ``(ok, slack)`` where ``ok`` means every bank has strictly positive net worth."""
    r = nominal_slack(net)
    return bool(np.all(r > 0)), r


def require_nominal_solvency(net: FinancialNetwork, allow_boundary: bool = False) -> np.ndarray:
    ok, r = check_nominal_solvency(net)
    if ok:
        return r
    bad = np.flatnonzero(r <= 0)
    if allow_boundary and np.all(r >= 0):
        warnings.warn(f"banks {bad.tolist()} have zero nominal net worth", stacklevel=2)
        return r
    raise NominalDefault(f"banks {bad.tolist()} are not solvent at nominal prices (slack {r[bad].tolist()})")


def perturbed_inflow(net: FinancialNetwork, delta: Sequence[float]) -> np.ndarray:
    delta = np.asarray(delta, dtype=float).reshape(-1)
    if delta.shape != (net.m,):
        raise DimensionMismatch(f"price perturbation must have length {net.m}, got {delta.shape[0]}")
    return net.nominal_inflow + net.asset_shares @ delta
