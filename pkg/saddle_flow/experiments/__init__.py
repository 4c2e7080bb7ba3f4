"""
Built-in instances, single runs and figure replication.
"""

from .problems import (
    PROBLEMS,
    ProblemInstance,
    example1,
    example2,
    get_problem,
    instance_from_problem,
    multiplier_line_problem,
    random_qp,
    structured_lift,
)
from .runner import (
    CSV_COLUMNS,
    CurveResult,
    CurveSummary,
    ExperimentSpec,
    resolve_instance,
    run_experiment,
    simulate,
    write_curve_csv,
)
from .replicate import figure_jobs, replicate

__all__ = [
    "PROBLEMS",
    "ProblemInstance",
    "example1",
    "example2",
    "get_problem",
    "instance_from_problem",
    "multiplier_line_problem",
    "random_qp",
    "structured_lift",
    "CSV_COLUMNS",
    "CurveResult",
    "CurveSummary",
    "ExperimentSpec",
    "resolve_instance",
    "run_experiment",
    "simulate",
    "write_curve_csv",
    "figure_jobs",
    "replicate",
]
