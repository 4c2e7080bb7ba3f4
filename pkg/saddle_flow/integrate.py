"""
Time stepping for the flow fields.

Two methods share one code path for autonomous and non-autonomous fields
(the field always receives t):
- fixed-rk4: classical fourth-order Runge-Kutta with step h
- adaptive-dp54: Dormand-Prince 5(4) via scipy's RK45 with dense output at
  the sample times

For quadratic objectives the AH field is affine, z' = M z + offset, and
linear_flow_oracle gives the exact solution through a matrix exponential.
"""

import logging
from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy import integrate as sp_integrate
from scipy import linalg

from .errors import BlowUpError, ContractViolation, SaddleFlowError, StepUnderflowError, UnsupportedOperationError
from .flows import VectorField
from .model import PrimalDualState, QuadraticObjective, SaddleProblem, kkt_solve
from .model.objectives import as_vector

logger = logging.getLogger(__name__)

MIN_STEP = 1e-13
DECAY_TOL = 1e-9


# ============================================================================
# Configuration and trajectory
# ============================================================================

class IntegratorConfig(BaseModel):
    """How to integrate and where to sample"""
    method: Literal["fixed-rk4", "adaptive-dp54"] = Field(default="adaptive-dp54", description="Stepping method")
    step: float = Field(default=1e-3, gt=0.0, description="Step h for fixed-rk4")
    rtol: float = Field(default=1e-9, gt=0.0, description="Relative tolerance for adaptive-dp54")
    atol: float = Field(default=1e-12, gt=0.0, description="Absolute tolerance for adaptive-dp54")
    horizon: float = Field(default=50.0, gt=0.0, description="Final time T")
    sample_interval: float = Field(default=0.01, gt=0.0, description="Spacing of stored samples")

    model_config = {
        "frozen": True,
        "json_schema_extra": {
            "example": {
                "method": "adaptive-dp54",
                "step": 1e-3,
                "rtol": 1e-9,
                "atol": 1e-12,
                "horizon": 50.0,
                "sample_interval": 0.01,
            }
        },
    }

    @model_validator(mode="after")
    def check_fixed_grid(self) -> "IntegratorConfig":
        if self.method == "fixed-rk4":
            if self.sample_interval < self.step * (1.0 - 1e-12):
                raise ValueError(f"sample_interval={self.sample_interval} is smaller than step={self.step}")
            ratio = self.sample_interval / self.step
            if abs(ratio - round(ratio)) > 1e-9 * ratio:
                raise ValueError(
                    f"sample_interval={self.sample_interval} is not an integer multiple of step={self.step} (fixed-rk4)"
                )
        return self

    @property
    def steps_per_sample(self) -> int:
        return int(round(self.sample_interval / self.step))


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution with the field evaluated at every stored state.

    blocks gives the sizes (n, p, m) of the x, y and lambda blocks; p is 0 for
    AH runs. second_order marks AAH phase vectors whose second half holds
    the velocities.
    """
    times: np.ndarray
    states: np.ndarray
    derivatives: np.ndarray
    flow: str = "ah"
    blocks: Tuple[int, int, int] = (0, 0, 0)
    second_order: bool = False

    def __post_init__(self):
        times = as_vector(self.times, "times")
        states = np.array(self.states, dtype=float)
        derivatives = np.array(self.derivatives, dtype=float)
        if states.shape[0] != times.shape[0] or derivatives.shape != states.shape:
            raise ContractViolation("times, states and derivatives must have matching lengths")
        if times.shape[0] > 1 and np.any(np.diff(times) <= 0):
            raise ContractViolation("trajectory times must be strictly increasing")
        states.setflags(write=False)
        derivatives.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "derivatives", derivatives)

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def split(self, vectors: np.ndarray) -> Tuple[np.ndarray, Optional[np.ndarray], np.ndarray]:
        """Split rows of a (k, d) array into x, y (or None) and lambda blocks"""
        n, p, m = self.blocks
        x = vectors[:, :n]
        y = vectors[:, n:n + p] if p else None
        lam = vectors[:, n + p:n + p + m]
        return x, y, lam


def sample_times(t_start: float, horizon: float, sample_interval: float) -> np.ndarray:
    """t_start + k * sample_interval for every k that stays within the horizon"""
    count = int(np.floor((horizon - t_start) / sample_interval + 1e-9))
    return t_start + sample_interval * np.arange(count + 1)


# ============================================================================
# Stepping
# ============================================================================

def _checked(field: VectorField, t: float, z: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(z)):
        raise BlowUpError(t, "state")
    dz = np.asarray(field(t, z), dtype=float)
    if not np.all(np.isfinite(dz)):
        raise BlowUpError(t, "field evaluation")
    return dz


def rk4_step(field: VectorField, t: float, z: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step of size h"""
    if h <= 0:
        raise ContractViolation(f"step must be positive, got {h}")
    k1 = _checked(field, t, z)
    k2 = _checked(field, t + 0.5 * h, z + 0.5 * h * k1)
    k3 = _checked(field, t + 0.5 * h, z + 0.5 * h * k2)
    k4 = _checked(field, t + h, z + h * k3)
    z_next = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(z_next)):
        raise BlowUpError(t + h, "rk4 update")
    return z_next


def _integrate_fixed(field: VectorField, z0: np.ndarray, grid: np.ndarray, cfg: IntegratorConfig) -> np.ndarray:
    states = np.empty((grid.shape[0], z0.shape[0]))
    states[0] = z0
    z = z0.copy()
    per_sample = cfg.steps_per_sample
    t_start = grid[0]
    for k in range(1, grid.shape[0]):
        for j in range(per_sample):
            # Times are rebuilt from the start to avoid drift
            t = t_start + ((k - 1) * per_sample + j) * cfg.step
            z = rk4_step(field, t, z, cfg.step)
        states[k] = z
    return states


def _integrate_adaptive(field: VectorField, z0: np.ndarray, grid: np.ndarray, cfg: IntegratorConfig) -> np.ndarray:
    """Step scipy's RK45 one accepted step at a time and read samples off its dense output"""
    def fun(t: float, z: np.ndarray) -> np.ndarray:
        return _checked(field, t, z)

    solver = sp_integrate.RK45(fun, grid[0], z0, grid[-1], rtol=cfg.rtol, atol=cfg.atol)
    states = np.empty((grid.shape[0], z0.shape[0]))
    states[0] = z0
    k = 1
    while k < grid.shape[0]:
        message = solver.step()
        if solver.status == "failed":
            raise StepUnderflowError(f"adaptive step fell below {MIN_STEP:g} near t={solver.t:.6g}: {message}")
        # the last step is clipped to land on the horizon
        if solver.status == "running" and solver.step_size < MIN_STEP:
            raise StepUnderflowError(
                f"adaptive step {solver.step_size:.3g} fell below {MIN_STEP:g} at t={solver.t:.6g}"
            )
        dense = solver.dense_output()
        while k < grid.shape[0] and (grid[k] <= solver.t or solver.status == "finished"):
            states[k] = dense(grid[k])
            k += 1
    logger.debug(f"DP54 finished with {solver.nfev} field evaluations")
    return states


def integrate(
    field: VectorField,
    z0: np.ndarray,
    t_start: float,
    cfg: IntegratorConfig,
    flow: str = "ah",
    blocks: Tuple[int, int, int] = (0, 0, 0),
    second_order: bool = False,
) -> Trajectory:
    """
    Integrate z' = field(t, z) from (t_start, z0) up to cfg.horizon.

    States are stored at t_start + k * sample_interval; the stored derivatives
    are fresh field evaluations at those states.

    Raises:
        BlowUpError: a non-finite value appeared.
        StepUnderflowError: the adaptive controller could not proceed.
    """
    if cfg.horizon <= t_start:
        raise ContractViolation(f"horizon {cfg.horizon} must exceed the start time {t_start}")
    z0 = np.array(z0, dtype=float)
    if not np.all(np.isfinite(z0)):
        raise BlowUpError(t_start, "initial state")
    grid = sample_times(t_start, cfg.horizon, cfg.sample_interval)
    if grid.shape[0] < 2:
        raise ContractViolation("horizon is shorter than one sample interval")

    logger.debug(f"🚀 Integrating {flow} with {cfg.method} on [{t_start:g}, {grid[-1]:g}], {grid.shape[0]} samples")
    if cfg.method == "fixed-rk4":
        states = _integrate_fixed(field, z0, grid, cfg)
    else:
        states = _integrate_adaptive(field, z0, grid, cfg)
    derivatives = np.array([_checked(field, t, z) for t, z in zip(grid, states)])
    return Trajectory(
        times=grid,
        states=states,
        derivatives=derivatives,
        flow=flow,
        blocks=blocks,
        second_order=second_order,
    )


# ============================================================================
# Linear flow oracle
# ============================================================================

def field_matrix(p: SaddleProblem) -> Tuple[np.ndarray, np.ndarray]:
    """
    (M, offset) with AH field z' = M z + offset for quadratic objectives.

    M = [[-Q, -A'], [A, 0]], offset = (-q, -b).
    """
    o = p.objective
    if not isinstance(o, QuadraticObjective):
        raise UnsupportedOperationError("field_matrix needs a quadratic objective")
    n, m = p.n, p.m
    M = np.zeros((n + m, n + m))
    M[:n, :n] = -o.Q
    M[:n, n:] = -p.A.T
    M[n:, :n] = p.A
    return M, np.concatenate([-o.q, -p.b])


def linear_flow_oracle(p: SaddleProblem, z0: np.ndarray, t: float) -> np.ndarray:
    """Exact AH state at time t: z* + expm(t M)(z0 - z*)"""
    M, _ = field_matrix(p)
    z_star = kkt_solve(p).as_vector()
    z0 = np.asarray(z0, dtype=float)
    return z_star + linalg.expm(t * M) @ (z0 - z_star)


def slowest_decay_exponent(M: np.ndarray, tol: float = DECAY_TOL) -> float:
    """
    -2 * max Re(mu) over eigenvalues of M with Re(mu) < -tol.

    This is the exponential rate of the squared error on the decaying
    subspace; neutral (zero) eigenvalues from non-unique saddles are skipped.
    """
    real_parts = np.real(linalg.eigvals(M))
    decaying = real_parts[real_parts < -tol]
    if decaying.size == 0:
        raise UnsupportedOperationError("field matrix has no decaying eigenvalues")
    return float(-2.0 * np.max(decaying))


def slowest_decay_multiplicity(M: np.ndarray, tol: float = DECAY_TOL, cluster: float = 1e-6) -> int:
    """
    Number of eigenvalues of M that coincide with a slowest decaying one.

    A value above one marks a repeated (critically damped) mode, whose
    squared error carries a polynomial factor in front of the exponential.
    Conjugate pairs count separately.
    """
    mu = linalg.eigvals(M)
    decaying = mu[np.real(mu) < -tol]
    if decaying.size == 0:
        raise UnsupportedOperationError("field matrix has no decaying eigenvalues")
    slowest = decaying[np.argmax(np.real(decaying))]
    return int(np.count_nonzero(np.abs(decaying - slowest) <= cluster * (1.0 + abs(slowest))))
