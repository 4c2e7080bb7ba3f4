"""
Vector fields for the primal-dual dynamical systems.

- AH:  x' = -grad f(x) - A'lambda,  lambda' = Ax - b
- GAH: the same for f(x) + g(y) subject to Ax + By = c
- AAH: second-order system with vanishing damping nu/t, extrapolation
  coefficient theta and augmentation mu (first-order phase form)

Plus the damped harmonic oscillator residuals that hold along AH solutions
when the Hessian of f is a multiple of the identity.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy import linalg

from .errors import ContractViolation, DimensionError, UnsupportedOperationError
from .model import LinearConstraint, PrimalDualState, QuadraticObjective, SaddleProblem, saddle_operator
from .model.objectives import Objective, as_matrix, as_vector

logger = logging.getLogger(__name__)

VectorField = Callable[[float, np.ndarray], np.ndarray]


# ============================================================================
# Structured problem
# ============================================================================

@dataclass(frozen=True)
class StructuredProblem:
    """Problem (SP): minimize f(x) + g(y) subject to Ax + By = c"""
    f_objective: Objective
    g_objective: Objective
    A: np.ndarray
    B: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        c = as_vector(self.c, "c")
        A = as_matrix(self.A, "A", cols=self.f_objective.dim)
        B = as_matrix(self.B, "B", cols=self.g_objective.dim)
        if A.shape != (c.shape[0], self.f_objective.dim):
            raise DimensionError(f"A has shape {A.shape}, expected ({c.shape[0]}, {self.f_objective.dim})")
        if B.shape != (c.shape[0], self.g_objective.dim):
            raise DimensionError(f"B has shape {B.shape}, expected ({c.shape[0]}, {self.g_objective.dim})")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    @property
    def m(self) -> int:
        return self.c.shape[0]

    def residual(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.A @ x + self.B @ y - self.c

    def combined(self) -> SaddleProblem:
        """
        The same problem in (P) form over the stacked variable (x, y).

        GAH on (SP) is AH on this problem, with state layout (x, y, lambda)
        unchanged, so it also serves as the KKT oracle for (SP).
        """
        f, g = self.f_objective, self.g_objective
        if not (isinstance(f, QuadraticObjective) and isinstance(g, QuadraticObjective)):
            raise UnsupportedOperationError("stacking needs quadratic f and g")
        objective = QuadraticObjective(
            Q=linalg.block_diag(f.Q, g.Q),
            q=np.concatenate([f.q, g.q]),
            c0=f.c0 + g.c0,
        )
        return SaddleProblem(
            objective=objective,
            constraint=LinearConstraint(A=np.hstack([self.A, self.B]), b=self.c),
        )

    def check_state(self, z: PrimalDualState) -> None:
        y_dim = 0 if z.y is None else z.y.shape[0]
        if (z.x.shape[0], y_dim, z.lam.shape[0]) != (self.n, self.p, self.m):
            raise DimensionError(
                f"state blocks ({z.x.shape[0]}, {y_dim}, {z.lam.shape[0]}) do not match ({self.n}, {self.p}, {self.m})"
            )


class AahParams(BaseModel):
    """Parameters of the accelerated (AAH) system"""
    nu: float = Field(default=3.0, ge=3.0, description="Damping exponent, damping coefficient is nu/t")
    theta: float = Field(default=0.5, description="Extrapolation coefficient in [1/(nu-1), 1/2]")
    mu: float = Field(default=0.5, ge=0.0, description="Augmentation parameter of L_mu")
    t0: float = Field(default=1.0, gt=0.0, description="Start time (the system is singular at t=0)")

    model_config = {
        "frozen": True,
        "json_schema_extra": {"example": {"nu": 3.0, "theta": 0.5, "mu": 0.5, "t0": 1.0}},
    }

    @model_validator(mode="after")
    def check_theta(self) -> "AahParams":
        lo = 1.0 / (self.nu - 1.0)
        if not (lo - 1e-15 <= self.theta <= 0.5 + 1e-15):
            raise ValueError(f"theta={self.theta} outside [1/(nu-1), 1/2] = [{lo:.6g}, 0.5]")
        return self


@dataclass(frozen=True)
class SecondOrderState:
    """Phase vector (x, y, lambda, x', y', lambda') of the AAH system"""
    vector: np.ndarray
    n: int
    p: int
    m: int

    def __post_init__(self):
        v = as_vector(self.vector, "phase vector")
        if v.shape[0] != 2 * (self.n + self.p + self.m):
            raise DimensionError(f"phase vector has length {v.shape[0]}, expected {2 * (self.n + self.p + self.m)}")
        if not np.all(np.isfinite(v)):
            raise ContractViolation("phase vector has non-finite entries")
        object.__setattr__(self, "vector", v)

    @property
    def positions(self) -> PrimalDualState:
        return PrimalDualState.from_vector(self.vector[: self.n + self.p + self.m], self.n, self.m, self.p)

    @property
    def velocities(self) -> PrimalDualState:
        return PrimalDualState.from_vector(self.vector[self.n + self.p + self.m:], self.n, self.m, self.p)


def aah_initial_state(
    sp: StructuredProblem,
    x0: np.ndarray,
    y0: np.ndarray,
    lambda0: np.ndarray,
    v0: Optional[np.ndarray] = None,
    w0: Optional[np.ndarray] = None,
    mu0: Optional[np.ndarray] = None,
) -> SecondOrderState:
    """Pack AAH initial data; velocities default to zero"""
    v0 = np.zeros(sp.n) if v0 is None else v0
    w0 = np.zeros(sp.p) if w0 is None else w0
    mu0 = np.zeros(sp.m) if mu0 is None else mu0
    vector = np.concatenate([x0, y0, lambda0, v0, w0, mu0]).astype(float)
    return SecondOrderState(vector=vector, n=sp.n, p=sp.p, m=sp.m)


# ============================================================================
# AH and GAH fields
# ============================================================================

def ah_field(p: SaddleProblem, z: PrimalDualState) -> np.ndarray:
    """(x', lambda') = (-grad f(x) - A'lambda, Ax - b) = -T(z)"""
    return -saddle_operator(p, z)


def structured_operator(sp: StructuredProblem, z: PrimalDualState) -> np.ndarray:
    """T(x, y, lambda) = (grad f(x) + A'lambda, grad g(y) + B'lambda, c - Ax - By)"""
    sp.check_state(z)
    return np.concatenate([
        sp.f_objective.gradient(z.x) + sp.A.T @ z.lam,
        sp.g_objective.gradient(z.y) + sp.B.T @ z.lam,
        -sp.residual(z.x, z.y),
    ])


def gah_field(sp: StructuredProblem, z: PrimalDualState) -> np.ndarray:
    """(x', y', lambda') = -T(x, y, lambda)"""
    return -structured_operator(sp, z)


def structured_lagrangian(sp: StructuredProblem, x: np.ndarray, y: np.ndarray, lam: np.ndarray) -> float:
    """L(x, y, lambda) = f(x) + g(y) + <lambda, Ax + By - c>"""
    return augmented_lagrangian(sp, 0.0, x, y, lam)


def augmented_lagrangian(sp: StructuredProblem, mu: float, x: np.ndarray, y: np.ndarray, lam: np.ndarray) -> float:
    """L_mu = L + mu/2 |Ax + By - c|^2"""
    r = sp.residual(x, y)
    return sp.f_objective.value(x) + sp.g_objective.value(y) + float(lam @ r) + 0.5 * mu * float(r @ r)


def augmented_lagrangian_grads(
    sp: StructuredProblem,
    mu: float,
    x: np.ndarray,
    y: np.ndarray,
    lam: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Partial gradients (grad_x, grad_y, grad_lambda) of L_mu"""
    if mu < 0:
        raise ContractViolation(f"augmentation mu must be >= 0, got {mu}")
    r = sp.residual(x, y)
    weighted = lam + mu * r
    return (
        sp.f_objective.gradient(x) + sp.A.T @ weighted,
        sp.g_objective.gradient(y) + sp.B.T @ weighted,
        r,
    )


# ============================================================================
# AAH field
# ============================================================================

def aah_field(sp: StructuredProblem, params: AahParams, t: float, s: np.ndarray) -> np.ndarray:
    """
    First-order form of the AAH system.

    x''      = -(nu/t) x'      - grad_x L_mu(x, y, lambda + theta t lambda')
    y''      = -(nu/t) y'      - grad_y L_mu(x, y, lambda + theta t lambda')
    lambda'' = -(nu/t) lambda' + grad_lambda L_mu(x + theta t x', y + theta t y', lambda)
    """
    if t < params.t0:
        raise ContractViolation(f"AAH field evaluated at t={t} < t0={params.t0}")
    n, p, m = sp.n, sp.p, sp.m
    s = np.asarray(s, dtype=float)
    if s.shape[0] != 2 * (n + p + m):
        raise DimensionError(f"phase vector has length {s.shape[0]}, expected {2 * (n + p + m)}")
    k = n + p + m
    x, y, lam = s[:n], s[n:n + p], s[n + p:k]
    vx, vy, vl = s[k:k + n], s[k + n:k + n + p], s[k + n + p:]

    damping = params.nu / t
    reach = params.theta * t
    gx, gy, _ = augmented_lagrangian_grads(sp, params.mu, x, y, lam + reach * vl)
    _, _, gl = augmented_lagrangian_grads(sp, params.mu, x + reach * vx, y + reach * vy, lam)
    return np.concatenate([
        vx,
        vy,
        vl,
        -damping * vx - gx,
        -damping * vy - gy,
        -damping * vl + gl,
    ])


# ============================================================================
# Integrator adapters
# ============================================================================

def ah_vector_field(p: SaddleProblem) -> VectorField:
    n, m = p.n, p.m

    def field(t: float, v: np.ndarray) -> np.ndarray:
        return ah_field(p, PrimalDualState.from_vector(v, n, m))

    return field


def gah_vector_field(sp: StructuredProblem) -> VectorField:
    n, p, m = sp.n, sp.p, sp.m

    def field(t: float, v: np.ndarray) -> np.ndarray:
        return gah_field(sp, PrimalDualState.from_vector(v, n, m, p))

    return field


def aah_vector_field(sp: StructuredProblem, params: AahParams) -> VectorField:
    def field(t: float, v: np.ndarray) -> np.ndarray:
        return aah_field(sp, params, t, v)

    return field


# ============================================================================
# Damped harmonic oscillator residuals
# ============================================================================

def _scalar_alpha(p: SaddleProblem) -> float:
    scalar = p.objective.scalar_hessian()
    if scalar is None:
        raise UnsupportedOperationError("oscillator residuals need a Hessian equal to alpha * identity")
    return scalar


def primal_acceleration(p: SaddleProblem, xdot: np.ndarray, lamdot: np.ndarray) -> np.ndarray:
    """x'' = -alpha x' - A'lambda' (differentiating the AH field along the flow)"""
    return -_scalar_alpha(p) * np.asarray(xdot) - p.A.T @ np.asarray(lamdot)


def dual_acceleration(p: SaddleProblem, xdot: np.ndarray) -> np.ndarray:
    """lambda'' = A x'"""
    return p.A @ np.asarray(xdot)


def oscillator_residual_primal(
    p: SaddleProblem,
    x: np.ndarray,
    xdot: np.ndarray,
    xddot: np.ndarray,
    xbar: np.ndarray,
) -> float:
    """|x'' + alpha x' + A'A(x - xbar)|, zero along exact AH solutions"""
    alpha = _scalar_alpha(p)
    A = p.A
    return float(np.linalg.norm(xddot + alpha * xdot + A.T @ (A @ (x - xbar))))


def oscillator_residual_dual(
    p: SaddleProblem,
    lam: np.ndarray,
    lamdot: np.ndarray,
    lamddot: np.ndarray,
    lambar: np.ndarray,
) -> float:
    """|lambda'' + alpha lambda' + AA'(lambda - lambar)|"""
    alpha = _scalar_alpha(p)
    A = p.A
    return float(np.linalg.norm(lamddot + alpha * lamdot + A @ (A.T @ (lam - lambar))))
