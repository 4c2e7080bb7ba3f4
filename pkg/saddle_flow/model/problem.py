"""
Linearly constrained convex problems and their Lagrangian.

Problem (P): minimize f(x) subject to Ax - b = 0, with Lagrangian
L(x, lambda) = f(x) + <lambda, Ax - b> and saddle operator
T(x, lambda) = (grad f(x) + A'lambda, b - Ax).
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field
from scipy import linalg

from ..errors import ContractViolation, DimensionError
from .objectives import Objective, QuadraticObjective, as_matrix, as_vector

logger = logging.getLogger(__name__)


# ============================================================================
# Domain types
# ============================================================================

@dataclass(frozen=True)
class LinearConstraint:
    """Equality constraint Ax = b with A of shape (m, n)"""
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        b = as_vector(self.b, "b")
        A = as_matrix(self.A, "A")
        if A.shape[0] != b.shape[0]:
            raise DimensionError(f"A has {A.shape[0]} rows but b has length {b.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def residual(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x - self.b


@dataclass(frozen=True)
class SaddleProblem:
    """Problem (P): objective plus linear equality constraint"""
    objective: Objective
    constraint: LinearConstraint

    def __post_init__(self):
        if self.objective.dim != self.constraint.n:
            raise DimensionError(
                f"objective dimension {self.objective.dim} != constraint columns {self.constraint.n}"
            )

    @property
    def n(self) -> int:
        return self.constraint.n

    @property
    def m(self) -> int:
        return self.constraint.m

    @property
    def A(self) -> np.ndarray:
        return self.constraint.A

    @property
    def b(self) -> np.ndarray:
        return self.constraint.b

    @property
    def is_quadratic(self) -> bool:
        return isinstance(self.objective, QuadraticObjective)

    def check_state(self, z: "PrimalDualState") -> None:
        if z.x.shape[0] != self.n or z.lam.shape[0] != self.m:
            raise DimensionError(
                f"state has shapes ({z.x.shape[0]}, {z.lam.shape[0]}), problem expects ({self.n}, {self.m})"
            )


@dataclass(frozen=True)
class PrimalDualState:
    """z = (x, lambda); structured problems add a y block"""
    x: np.ndarray
    lam: np.ndarray
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "x", as_vector(self.x, "x"))
        object.__setattr__(self, "lam", as_vector(self.lam, "lambda"))
        if self.y is not None:
            object.__setattr__(self, "y", as_vector(self.y, "y"))
        if not np.all(np.isfinite(self.as_vector())):
            raise ContractViolation("state has non-finite entries")

    def as_vector(self) -> np.ndarray:
        blocks = [self.x] if self.y is None else [self.x, self.y]
        return np.concatenate(blocks + [self.lam])

    @classmethod
    def from_vector(cls, v: np.ndarray, n: int, m: int, p: int = 0) -> "PrimalDualState":
        v = np.asarray(v, dtype=float)
        if v.shape[0] != n + p + m:
            raise DimensionError(f"vector has length {v.shape[0]}, expected {n + p + m}")
        if p:
            return cls(x=v[:n], y=v[n:n + p], lam=v[n + p:])
        return cls(x=v[:n], lam=v[n:])


@dataclass(frozen=True)
class OperatorConstants:
    """Eigenvalue extremes of A'A and AA'.

    beta_primal > 0 iff A is bounded from below (injective),
    beta_dual > 0 iff A* is bounded from below (A surjective).
    """
    beta_primal: float
    beta_dual: float
    a_norm_sq: float


# ============================================================================
# Lagrangian and saddle operator
# ============================================================================

def lagrangian(p: SaddleProblem, z: PrimalDualState) -> float:
    """L(x, lambda) = f(x) + <lambda, Ax - b>"""
    p.check_state(z)
    return p.objective.value(z.x) + float(z.lam @ p.constraint.residual(z.x))


def lagrangian_grad(p: SaddleProblem, z: PrimalDualState) -> Tuple[np.ndarray, np.ndarray]:
    """(grad_x L, grad_lambda L) = (grad f(x) + A'lambda, Ax - b)"""
    p.check_state(z)
    return p.objective.gradient(z.x) + p.A.T @ z.lam, p.constraint.residual(z.x)


def saddle_operator(p: SaddleProblem, z: PrimalDualState) -> np.ndarray:
    """T(z) = (grad f(x) + A'lambda, b - Ax) as one flat vector"""
    gx, gl = lagrangian_grad(p, z)
    return np.concatenate([gx, -gl])


def strong_monotonicity_slack(
    p: SaddleProblem,
    z: PrimalDualState,
    w: PrimalDualState,
    alpha: float,
) -> float:
    """
    <T(x, lam), (x, lam) - (y, eta)> - (L(x, eta) - L(y, lam) + alpha |x - y|^2 / 2).

    Nonnegative whenever grad f is alpha-strongly monotone.
    """
    lhs = float(saddle_operator(p, z) @ (z.as_vector() - w.as_vector()))
    gap = lagrangian(p, PrimalDualState(x=z.x, lam=w.lam)) - lagrangian(p, PrimalDualState(x=w.x, lam=z.lam))
    return lhs - gap - 0.5 * alpha * float(np.sum((z.x - w.x) ** 2))


def operator_constants(c: LinearConstraint) -> OperatorConstants:
    """Extreme eigenvalues of A'A and AA' (clipped at zero)"""
    A = c.A
    if A.size == 0:
        return OperatorConstants(beta_primal=0.0, beta_dual=0.0, a_norm_sq=0.0)
    primal = linalg.eigvalsh(A.T @ A)
    dual = linalg.eigvalsh(A @ A.T)
    a_norm_sq = max(float(primal[-1]), 0.0)
    # Rank deficiency shows up as roundoff-sized eigenvalues
    floor = 1e-12 * max(1.0, a_norm_sq)

    def clip(v: float) -> float:
        return 0.0 if v < floor else float(v)

    return OperatorConstants(
        beta_primal=clip(primal[0]),
        beta_dual=clip(dual[0]),
        a_norm_sq=a_norm_sq,
    )


# ============================================================================
# JSON problem serialization
# ============================================================================

class ProblemData(BaseModel):
    """Quadratic problem in the JSON exchange format (row-major matrices)"""
    Q: List[List[float]] = Field(..., description="Symmetric n x n Hessian")
    q: List[float] = Field(..., description="Linear term, length n")
    c0: float = Field(default=0.0, description="Constant term")
    A: List[List[float]] = Field(..., description="m x n constraint matrix")
    b: List[float] = Field(..., description="Right-hand side, length m")

    model_config = {
        "json_schema_extra": {
            "example": {
                "Q": [[1.0, -0.5], [-0.5, 1.0]],
                "q": [0.0, 0.0],
                "c0": 0.0,
                "A": [[1.0, 0.0], [0.0, 1.0]],
                "b": [1.0, 1.0],
            }
        }
    }

    def to_problem(self) -> SaddleProblem:
        n = len(self.q)
        objective = QuadraticObjective(Q=np.array(self.Q, dtype=float).reshape(n, n), q=self.q, c0=self.c0)
        A = np.array(self.A, dtype=float).reshape(len(self.b), n)
        return SaddleProblem(objective=objective, constraint=LinearConstraint(A=A, b=self.b))

    @classmethod
    def from_problem(cls, p: SaddleProblem) -> "ProblemData":
        if not isinstance(p.objective, QuadraticObjective):
            raise DimensionError("only quadratic problems can be serialized")
        o = p.objective
        return cls(Q=o.Q.tolist(), q=o.q.tolist(), c0=o.c0, A=p.A.tolist(), b=p.b.tolist())


def load_problem(path: Union[str, Path]) -> SaddleProblem:
    """Read a quadratic problem from its JSON description"""
    text = Path(path).read_text()
    problem = ProblemData.model_validate(json.loads(text)).to_problem()
    logger.debug(f"Loaded problem n={problem.n} m={problem.m} from {path}")
    return problem


def dump_problem(p: SaddleProblem, path: Union[str, Path]) -> None:
    Path(path).write_text(ProblemData.from_problem(p).model_dump_json(indent=2))
