"""
Built-in problem instances.

- example1: strongly convex quadratic with A = identity
- example2(alpha): isotropic quadratic with one scalar constraint, the
  damping regime is set by alpha
- multiplier-line: injective A with a one-dimensional multiplier set
- random-qp: seeded random strongly convex QPs with full row rank A
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from ..errors import ContractViolation, ValidationFailure
from ..flows import StructuredProblem
from ..model import (
    LinearConstraint,
    QuadraticObjective,
    SaddlePoint,
    SaddleProblem,
    convexity_constants,
    kkt_solve,
    operator_constants,
)
from ..model.objectives import as_vector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProblemInstance:
    """A problem with its certified saddle point and reference initial data.

    beta is the lower bound constant of A* (smallest eigenvalue of AA'),
    which is 0 when the multipliers are not unique.
    """
    name: str
    problem: SaddleProblem
    saddle: SaddlePoint
    x0: np.ndarray
    lambda0: np.ndarray
    alpha: float
    gamma: float
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "x0", as_vector(self.x0, "x0"))
        object.__setattr__(self, "lambda0", as_vector(self.lambda0, "lambda0"))

    @property
    def z0(self) -> np.ndarray:
        return np.concatenate([self.x0, self.lambda0])

    @property
    def z0_err_sq(self) -> float:
        """|z0 - z*|^2"""
        return float(np.sum((self.z0 - self.saddle.as_vector()) ** 2))


def instance_from_problem(
    name: str,
    problem: SaddleProblem,
    x0: Optional[np.ndarray] = None,
    lambda0: Optional[np.ndarray] = None,
) -> ProblemInstance:
    """Certify the saddle point and collect the constants; missing initial data is zero"""
    saddle = kkt_solve(problem)
    if not saddle.certified:
        raise ValidationFailure(
            "certified-saddle",
            f"{name}: residuals {saddle.stationarity_residual:.3g}, {saddle.feasibility_residual:.3g}",
        )
    alpha, gamma = convexity_constants(problem.objective)
    constants = operator_constants(problem.constraint)
    return ProblemInstance(
        name=name,
        problem=problem,
        saddle=saddle,
        x0=np.zeros(problem.n) if x0 is None else x0,
        lambda0=np.zeros(problem.m) if lambda0 is None else lambda0,
        alpha=alpha,
        gamma=gamma,
        beta=constants.beta_dual,
    )


def example1() -> ProblemInstance:
    """f(x) = (x1^2 - x1 x2 + x2^2) / 2 subject to x = (1, 1)"""
    problem = SaddleProblem(
        objective=QuadraticObjective(Q=[[1.0, -0.5], [-0.5, 1.0]], q=[0.0, 0.0]),
        constraint=LinearConstraint(A=np.eye(2), b=[1.0, 1.0]),
    )
    return instance_from_problem("example1", problem, x0=[-1.0, 1.0], lambda0=[1.0, 1.0])


def example2(alpha: float, b: float = 1.0) -> ProblemInstance:
    """
    f(x) = alpha |x|^2 / 2 subject to (x1 + x2) / sqrt(2) = b.

    AA' = 1, so alpha < 2, = 2, > 2 gives the under, critically and
    over-damped regimes.
    """
    if alpha <= 0:
        raise ContractViolation(f"alpha must be positive, got {alpha}")
    row = math.sqrt(2.0) / 2.0
    problem = SaddleProblem(
        objective=QuadraticObjective(Q=alpha * np.eye(2), q=[0.0, 0.0]),
        constraint=LinearConstraint(A=[[row, row]], b=[b]),
    )
    return instance_from_problem(f"example2-alpha{alpha:g}", problem, x0=[-1.0, 1.0], lambda0=[1.0])


def multiplier_line_problem() -> ProblemInstance:
    """
    f(x) = x^2 / 2 subject to x = 1 twice.

    A = (1, 1)' is injective but A' has a kernel, so the multipliers form the
    line lambda1 + lambda2 = -1 and AH solutions converge to the projection of
    lambda0 onto it.
    """
    problem = SaddleProblem(
        objective=QuadraticObjective(Q=[[1.0]], q=[0.0]),
        constraint=LinearConstraint(A=[[1.0], [1.0]], b=[1.0, 1.0]),
    )
    return instance_from_problem("multiplier-line", problem, x0=[0.0], lambda0=[4.0, -2.0])


def _orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed orthogonal matrix from the QR factors of a Gaussian matrix"""
    G = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def random_qp(
    seed: int,
    n: int = 4,
    m: int = 2,
    alpha_range: Tuple[float, float] = (0.5, 1.0),
    gamma_range: Tuple[float, float] = (2.0, 4.0),
    max_draws: int = 20,
) -> ProblemInstance:
    """
    Seeded random strongly convex QP with a certified saddle point.

    The Hessian spectrum has its minimum drawn from alpha_range and its
    maximum from gamma_range (for n = 1 only the minimum is used). The
    generator is PCG64, so the same seed gives bitwise-identical problems on
    every platform.
    """
    if not 1 <= m <= n:
        raise ContractViolation(f"need 1 <= m <= n, got n={n}, m={m}")
    lo_a, hi_a = alpha_range
    lo_g, hi_g = gamma_range
    if not (0 < lo_a <= hi_a and 0 < lo_g <= hi_g and hi_a <= lo_g):
        raise ContractViolation(f"invalid spectrum ranges alpha={alpha_range}, gamma={gamma_range}")

    rng = np.random.Generator(np.random.PCG64(seed))
    alpha = rng.uniform(lo_a, hi_a)
    gamma = rng.uniform(lo_g, hi_g)
    if n == 1:
        spectrum = np.array([alpha])
    else:
        spectrum = np.concatenate([[alpha, gamma], rng.uniform(alpha, gamma, size=n - 2)])
    U = _orthogonal(rng, n)
    Q = (U * spectrum) @ U.T
    Q = 0.5 * (Q + Q.T)
    q = rng.standard_normal(n)

    for draw in range(max_draws):
        A = rng.standard_normal((m, n))
        if operator_constants(LinearConstraint(A=A, b=np.zeros(m))).beta_dual > 1e-8:
            break
        logger.debug(f"Redrawing rank deficient A for seed {seed} (draw {draw})")
    else:
        raise ValidationFailure("full-row-rank", f"no full row rank A after {max_draws} draws")

    x_feasible = rng.standard_normal(n)
    problem = SaddleProblem(
        objective=QuadraticObjective(Q=Q, q=q),
        constraint=LinearConstraint(A=A, b=A @ x_feasible),
    )
    return instance_from_problem(
        f"random-qp-{seed}",
        problem,
        x0=rng.standard_normal(n),
        lambda0=rng.standard_normal(m),
    )


def structured_lift(p: SaddleProblem, p_dim: int = 1) -> StructuredProblem:
    """
    Embed (P) into (SP) with g(y) = |y|^2 / 2, B = 0 and c = b.

    The y block decouples (y' = -y under GAH), so x and lambda follow the AH
    dynamics of p.
    """
    if p_dim < 1:
        raise ContractViolation(f"lift dimension must be >= 1, got {p_dim}")
    return StructuredProblem(
        f_objective=p.objective,
        g_objective=QuadraticObjective(Q=np.eye(p_dim), q=np.zeros(p_dim)),
        A=p.A,
        B=np.zeros((p.m, p_dim)),
        c=p.b,
    )


# ============================================================================
# Registry
# ============================================================================

ProblemFactory = Callable[..., ProblemInstance]

PROBLEMS: Dict[str, ProblemFactory] = {
    "example1": lambda alpha=1.0, seed=0: example1(),
    "example2": lambda alpha=1.0, seed=0: example2(alpha),
    "multiplier-line": lambda alpha=1.0, seed=0: multiplier_line_problem(),
    "random-qp": lambda alpha=1.0, seed=0: random_qp(seed),
}


def get_problem(problem_id: str, alpha: float = 1.0, seed: int = 0) -> ProblemInstance:
    factory = PROBLEMS.get(problem_id)
    if factory is None:
        raise ContractViolation(f"unknown problem '{problem_id}', expected one of {sorted(PROBLEMS)}")
    return factory(alpha=alpha, seed=seed)
