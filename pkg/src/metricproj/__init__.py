"""Parallel Dykstra projection solver for metric-constrained optimization.

Solves the regularized LP relaxation of correlation clustering (the
l1 metric nearness problem) by cycling projections over the O(n^3)
triangle-inequality constraints, with a conflict-free schedule that
lets multiple workers project simultaneously without locking.
"""

from .core import (
    ConstraintKey,
    DualStore,
    Kind,
    PassStats,
    PrimalState,
    ProblemInstance,
    constraint_count,
    dual_objective,
    max_violation,
    primal_objective,
)
from .projection import StepOutcome, dykstra_step
from .solver import Solution, SolverConfig, initialize, run_pass, solve

__version__ = "0.1.0"
