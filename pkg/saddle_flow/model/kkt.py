"""
KKT oracle for quadratic problems and the affine multiplier set.

Solves the bordered system

    [ Q  A' ] [ xi  ]   [ -q ]
    [ A  0  ] [ eta ] = [  b ]

by LU with partial pivoting, falling back to a minimum-norm least-squares
solve when the matrix is rank deficient (non-unique multipliers).
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..errors import NoSaddlePointError, UnsupportedOperationError
from .objectives import QuadraticObjective, as_matrix, as_vector
from .problem import SaddleProblem

logger = logging.getLogger(__name__)

SADDLE_TOL = 1e-8


@dataclass(frozen=True)
class SaddlePoint:
    """Certified saddle point (xi, eta) with its KKT residuals.

    multiplier_basis holds an orthonormal basis (as columns) of null(A'), so
    the multiplier set is M = eta + span(multiplier_basis).
    """
    xi: np.ndarray
    eta: np.ndarray
    stationarity_residual: float
    feasibility_residual: float
    multiplier_min_norm: bool
    multiplier_basis: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xi", as_vector(self.xi, "xi"))
        object.__setattr__(self, "eta", as_vector(self.eta, "eta"))
        object.__setattr__(self, "multiplier_basis", as_matrix(self.multiplier_basis, cols=0))

    @property
    def certified(self) -> bool:
        return max(self.stationarity_residual, self.feasibility_residual) <= SADDLE_TOL

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.xi, self.eta])


def _range_residual(A: np.ndarray, b: np.ndarray) -> float:
    """Distance from b to range(A)"""
    if A.shape[1] == 0:
        return float(np.linalg.norm(b))
    sol, *_ = linalg.lstsq(A, b)
    return float(np.linalg.norm(A @ sol - b))


def kkt_solve(p: SaddleProblem, tol: float = SADDLE_TOL) -> SaddlePoint:
    """
    Solve the primal-dual optimality system of a quadratic problem.

    Raises:
        NoSaddlePointError: reason "infeasible" when b is outside range(A),
            "unbounded" when the KKT system is inconsistent for a feasible b.
        UnsupportedOperationError: the objective is not quadratic.
    """
    o = p.objective
    if not isinstance(o, QuadraticObjective):
        raise UnsupportedOperationError("kkt_solve needs a quadratic objective")
    n, m = p.n, p.m
    A, b = p.A, p.b

    infeasibility = _range_residual(A, b)
    if infeasibility > tol * (1.0 + float(np.linalg.norm(b))):
        raise NoSaddlePointError("infeasible", f"distance from b to range(A) is {infeasibility:.3e}")

    K = np.zeros((n + m, n + m))
    K[:n, :n] = o.Q
    K[:n, n:] = A.T
    K[n:, :n] = A
    rhs = np.concatenate([-o.q, b])

    rank = np.linalg.matrix_rank(K)
    min_norm = rank < n + m
    if min_norm:
        logger.debug(f"KKT matrix rank {rank} < {n + m}, using minimum-norm least squares")
        sol, *_ = linalg.lstsq(K, rhs)
        if np.linalg.matrix_rank(o.Q + A.T @ A) < n:
            logger.warning("⚠️  Primal solution is not unique; returning the minimum-norm one")
    else:
        sol = linalg.lu_solve(linalg.lu_factor(K), rhs)

    xi, eta = sol[:n], sol[n:]
    stationarity = float(np.linalg.norm(o.gradient(xi) + A.T @ eta))
    feasibility = float(np.linalg.norm(A @ xi - b))
    if max(stationarity, feasibility) > tol * (1.0 + float(np.linalg.norm(rhs))):
        raise NoSaddlePointError(
            "unbounded",
            f"KKT residuals ({stationarity:.3e}, {feasibility:.3e}) for feasible b",
        )

    basis = linalg.null_space(A.T) if m else np.zeros((0, 0))
    return SaddlePoint(
        xi=xi,
        eta=eta,
        stationarity_residual=stationarity,
        feasibility_residual=feasibility,
        multiplier_min_norm=bool(min_norm),
        multiplier_basis=basis,
    )


def multiplier_projection(p: SaddleProblem, xi: np.ndarray, lambda0: np.ndarray, tol: float = SADDLE_TOL) -> np.ndarray:
    """
    Orthogonal projection of lambda0 onto M = {lambda : A'lambda = -grad f(xi)}.

    The correction is the minimum-norm solution d of A'd = A'lambda0 + grad f(xi),
    which lies in range(A), so lambda0 - d is the nearest point of M.
    """
    lambda0 = np.asarray(lambda0, dtype=float)
    target = p.A.T @ lambda0 + p.objective.gradient(xi)
    d, *_ = linalg.lstsq(p.A.T, target)
    projected = lambda0 - d
    residual = float(np.linalg.norm(p.A.T @ projected + p.objective.gradient(xi)))
    if residual > tol * (1.0 + float(np.linalg.norm(target))):
        raise NoSaddlePointError("empty-multiplier-set", f"stationarity residual {residual:.3e}")
    return projected
