"""
Exceptions raised by saddle_flow.

Everything derives from SaddleFlowError so the CLI can map library failures
to exit code 1 with a single except clause.
"""

from typing import Optional


class SaddleFlowError(Exception):
    """Base class for all library errors"""


class ContractViolation(SaddleFlowError, ValueError):
    """An operation was called outside its documented domain"""


class DimensionError(ContractViolation):
    """Array shapes do not agree with the problem data"""


class NotConvexError(SaddleFlowError, ValueError):
    """Hessian has an eigenvalue below the convexity tolerance"""


class NoSaddlePointError(SaddleFlowError):
    """
    The Lagrangian has no saddle point.

    reason is one of:
    - "infeasible": b is not in the range of A
    - "unbounded": the objective is unbounded below on the feasible set
    - "empty-multiplier-set": no multiplier satisfies stationarity at xi
    """

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        message = f"no saddle point ({reason})"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class UnsupportedOperationError(SaddleFlowError):
    """The objective lacks the structure an operation needs"""


class BlowUpError(SaddleFlowError):
    """A field evaluation or integrator stage produced a non-finite value"""

    def __init__(self, t: float, detail: Optional[str] = None):
        self.t = t
        message = f"non-finite state at t={t:.6g}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class StepUnderflowError(SaddleFlowError):
    """The adaptive integrator could not keep the step above the minimum"""


class InsufficientDataError(SaddleFlowError):
    """Too few usable samples for a rate fit"""


class ValidationFailure(SaddleFlowError):
    """A named invariant check failed"""

    def __init__(self, check: str, detail: str = ""):
        self.check = check
        message = f"check '{check}' failed"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)
