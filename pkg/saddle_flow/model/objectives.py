"""
Objective functions for the primal problem.

Two kinds of objective are supported:
- QuadraticObjective: f(x) = 1/2 x'Qx + q'x + c0 with everything in closed form
- SmoothObjective: user supplied callables for f, its gradient and (optionally)
  the Hessian action
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import linalg

from ..errors import ContractViolation, DimensionError, NotConvexError, UnsupportedOperationError

logger = logging.getLogger(__name__)

PSD_TOL = 1e-10
SYMMETRY_TOL = 1e-12


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Copy values into a read-only float64 1-D array.

    Column and row vectors are flattened; anything with two non-trivial
    axes is rejected.
    """
    arr = np.array(values, dtype=float)
    if sum(d > 1 for d in arr.shape) > 1:
        raise DimensionError(f"{name} must be a vector, got shape {arr.shape}")
    arr = arr.reshape(-1)
    arr.setflags(write=False)
    return arr


def as_matrix(values, name: str = "matrix", cols: Optional[int] = None) -> np.ndarray:
    """Copy values into a read-only float64 2-D array.

    An empty input becomes a 0 x cols matrix so constraint-free problems keep
    consistent shapes.
    """
    arr = np.array(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else np.zeros((0, cols or 0))
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


# ============================================================================
# Quadratic objective
# ============================================================================

@dataclass(frozen=True)
class QuadraticObjective:
    """f(x) = 1/2 x'Qx + q'x + c0 with symmetric positive semidefinite Q"""
    Q: np.ndarray
    q: np.ndarray
    c0: float = 0.0
    alpha: float = field(init=False)
    gamma: float = field(init=False)

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionError(f"Q must be square, got shape {Q.shape}")
        q = np.array(self.q, dtype=float).reshape(-1)
        if q.shape[0] != Q.shape[0]:
            raise DimensionError(f"q has length {q.shape[0]}, expected {Q.shape[0]}")
        scale = max(1.0, float(np.max(np.abs(Q)))) if Q.size else 1.0
        if not np.allclose(Q, Q.T, rtol=0.0, atol=SYMMETRY_TOL * scale):
            raise ContractViolation("Q is not symmetric")
        # Symmetrize so the stored matrix equals its transpose entrywise
        Q = 0.5 * (Q + Q.T)
        eigs = linalg.eigvalsh(Q) if Q.size else np.zeros(0)
        if eigs.size and eigs[0] < -PSD_TOL:
            raise NotConvexError(f"Q has eigenvalue {eigs[0]:.3e} < -{PSD_TOL:g}")
        Q.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "c0", float(self.c0))
        object.__setattr__(self, "alpha", float(eigs[0]) if eigs.size else 0.0)
        object.__setattr__(self, "gamma", float(eigs[-1]) if eigs.size else 0.0)

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    @property
    def has_hessian(self) -> bool:
        return True

    @property
    def declared_alpha(self) -> float:
        return self.alpha

    @property
    def declared_gamma(self) -> float:
        return self.gamma

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q @ x + self.q @ x + self.c0)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.Q @ np.asarray(x, dtype=float) + self.q

    def hessian_vector(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.Q @ np.asarray(v, dtype=float)

    def scalar_hessian(self, tol: float = 1e-12) -> Optional[float]:
        """Return a when Q = a * identity, otherwise None"""
        a = float(self.Q[0, 0]) if self.dim else 0.0
        if np.allclose(self.Q, a * np.eye(self.dim), rtol=0.0, atol=tol):
            return a
        return None


# ============================================================================
# General smooth objective
# ============================================================================

@dataclass(frozen=True)
class SmoothObjective:
    """Convex C^1 objective given by callables.

    hessian_vector(x, v) is optional; operations that need second order
    information raise UnsupportedOperationError without it.
    """
    dim: int
    fun: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hessian_action: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    declared_alpha: Optional[float] = None
    declared_gamma: Optional[float] = None

    @property
    def has_hessian(self) -> bool:
        return self.hessian_action is not None

    def value(self, x: np.ndarray) -> float:
        return float(self.fun(np.asarray(x, dtype=float)))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.grad(np.asarray(x, dtype=float)), dtype=float).reshape(-1)

    def hessian_vector(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.hessian_action is None:
            raise UnsupportedOperationError("objective does not provide a Hessian action")
        return np.asarray(
            self.hessian_action(np.asarray(x, dtype=float), np.asarray(v, dtype=float)),
            dtype=float,
        ).reshape(-1)

    def scalar_hessian(self, tol: float = 1e-12) -> Optional[float]:
        return None

    def check_gradient(
        self,
        lo: float = -1.0,
        hi: float = 1.0,
        seed: int = 0,
        trials: int = 20,
        step: float = 1e-6,
        rtol: float = 1e-5,
    ) -> float:
        """
        Randomized directional finite-difference check of grad against fun.

        Samples points in the box [lo, hi]^dim and unit directions d, and
        compares <grad(x), d> with the central difference of fun along d.

        Returns:
            The worst relative discrepancy; <= rtol means the check holds.
        """
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(trials):
            x = rng.uniform(lo, hi, size=self.dim)
            d = rng.standard_normal(self.dim)
            d /= np.linalg.norm(d)
            analytic = float(self.gradient(x) @ d)
            numeric = (self.value(x + step * d) - self.value(x - step * d)) / (2.0 * step)
            scale = max(1.0, abs(analytic), abs(numeric))
            worst = max(worst, abs(analytic - numeric) / scale)
        if worst > rtol:
            logger.warning(f"⚠️  Gradient check discrepancy {worst:.3e} exceeds {rtol:g}")
        return worst


Objective = Union[QuadraticObjective, SmoothObjective]


# ============================================================================
# Operations on objectives
# ============================================================================

def convexity_constants(o: QuadraticObjective) -> Tuple[float, float]:
    """(alpha, gamma) = extreme eigenvalues of the Hessian"""
    return o.alpha, o.gamma


def bregman_distance(o: Objective, y: np.ndarray, x: np.ndarray) -> float:
    """D_f(y, x) = f(y) - f(x) - <grad f(x), y - x>"""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if isinstance(o, QuadraticObjective):
        # Exact second-order expansion avoids cancellation
        d = y - x
        return float(0.5 * d @ o.Q @ d)
    return o.value(y) - o.value(x) - float(o.gradient(x) @ (y - x))


def condition_c_residual(o: Objective, x: np.ndarray, y: np.ndarray) -> float:
    """
    2 D_f(y, x) - <hess f(x)(x - y), x - y>.

    Condition (C) holds at (x, y) iff the residual is >= 0; it vanishes
    identically for quadratics.
    """
    if not o.has_hessian:
        raise UnsupportedOperationError("condition (C) needs the Hessian action")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    return 2.0 * bregman_distance(o, y, x) - float(o.hessian_vector(x, d) @ d)
