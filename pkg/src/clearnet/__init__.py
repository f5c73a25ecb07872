"""Clearing payments, resilience margins and worst-case losses for interbank networks."""

__version__ = "0.1.0"

from .clearing import (
    ClearingResult,
    clearing_map,
    max_clearing_iterative,
    max_clearing_lp,
    min_clearing_iterative,
    system_loss,
)
from .experiments import LossCurve, loss_curve, random_shock
from .model import (
    FinancialNetwork,
    NormKind,
    PricePerturbation,
    build_network,
    check_nominal_solvency,
    load_network,
    nominal_inflow,
    perturbed_inflow,
)
from .resilience import MarginReport, default_margin, dual_norm_rows, insolvency_margin
from .worstcase import (
    Uniqueness,
    UniquenessReport,
    WorstCaseReport,
    uniqueness_check,
    worst_case_loss,
    worst_case_loss_l1,
    worst_case_loss_linf,
    worst_case_oracle,
)

__all__ = [
    "ClearingResult", "FinancialNetwork", "LossCurve", "MarginReport", "NormKind",
    "PricePerturbation", "Uniqueness", "UniquenessReport", "WorstCaseReport",
    "build_network", "check_nominal_solvency", "clearing_map", "default_margin",
    "dual_norm_rows", "insolvency_margin", "load_network", "loss_curve",
    "max_clearing_iterative", "max_clearing_lp", "min_clearing_iterative",
    "nominal_inflow", "perturbed_inflow", "random_shock", "system_loss",
    "uniqueness_check", "worst_case_loss", "worst_case_loss_l1",
    "worst_case_loss_linf", "worst_case_oracle",
]
