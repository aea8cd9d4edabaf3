"""Certifiably optimal k-sparse ridge regression by branch-and-bound."""

__version__ = "0.1.0"

from .beam import SupportCache, upper_solve
from .bnb import BnBResult, Node, Status, solve
from .bounds import EigenInfo, admm_lower_bound, compute_eigen_info, fast_lower_bound, saddle_h
from .core import (
    InfeasibleConfigError,
    ProblemData,
    SingularSystemError,
    SolverConfig,
    SparseSolution,
    build_problem,
    evaluate_loss,
    fit_support,
)
from .datagen import SyntheticSpec, brute_force_optimum, generate, recovery_metrics

__all__ = [
    "BnBResult",
    "EigenInfo",
    "InfeasibleConfigError",
    "Node",
    "ProblemData",
    "SingularSystemError",
    "SolverConfig",
    "SparseSolution",
    "Status",
    "SupportCache",
    "SyntheticSpec",
    "admm_lower_bound",
    "brute_force_optimum",
    "build_problem",
    "compute_eigen_info",
    "evaluate_loss",
    "fast_lower_bound",
    "fit_support",
    "generate",
    "recovery_metrics",
    "saddle_h",
    "solve",
    "upper_solve",
]
