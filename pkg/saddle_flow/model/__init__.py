"""
Problem definitions, the Lagrangian, the saddle operator T and the KKT oracle.
"""

from .objectives import (
    QuadraticObjective,
    SmoothObjective,
    Objective,
    convexity_constants,
    bregman_distance,
    condition_c_residual,
)
from .problem import (
    LinearConstraint,
    SaddleProblem,
    PrimalDualState,
    OperatorConstants,
    ProblemData,
    lagrangian,
    lagrangian_grad,
    saddle_operator,
    strong_monotonicity_slack,
    operator_constants,
    load_problem,
    dump_problem,
)
from .kkt import SaddlePoint, kkt_solve, multiplier_projection

__all__ = [
    "QuadraticObjective",
    "SmoothObjective",
    "Objective",
    "convexity_constants",
    "bregman_distance",
    "condition_c_residual",
    "LinearConstraint",
    "SaddleProblem",
    "PrimalDualState",
    "OperatorConstants",
    "ProblemData",
    "lagrangian",
    "lagrangian_grad",
    "saddle_operator",
    "strong_monotonicity_slack",
    "operator_constants",
    "load_problem",
    "dump_problem",
    "SaddlePoint",
    "kkt_solve",
    "multiplier_projection",
]
