"""Capacity of Gaussian MIMO channels under power and interference caps."""

from .linalg import TOL, Tolerances
from .model import (
    DualVariables,
    KktResiduals,
    ProblemInstance,
    Solution,
    User,
    aggregate_total_ipc,
    gram_from_channel,
    interference_power,
    is_feasible,
    mutual_information,
)
from .regimes import RegimeReport, classify
from .solver import DualSearchSettings, dual_search, kkt_residuals, solve, waterfilling

__version__ = "0.1.0"

__all__ = [
    "TOL",
    "Tolerances",
    "DualVariables",
    "KktResiduals",
    "ProblemInstance",
    "Solution",
    "User",
    "aggregate_total_ipc",
    "gram_from_channel",
    "interference_power",
    "is_feasible",
    "mutual_information",
    "RegimeReport",
    "classify",
    "DualSearchSettings",
    "dual_search",
    "kkt_residuals",
    "solve",
    "waterfilling",
]
