"""
Diagnostic quantities along trajectories and decay-rate estimation.

Series are computed from stored states and stored field evaluations only;
velocities are never finite-differenced. Rates are fitted by ordinary least
squares on log values (statsmodels OLS).
"""

import logging
import math
from dataclasses import dataclass
from typing import Literal, Optional, Tuple, Union

import numpy as np
import statsmodels.api as sm
from pydantic import BaseModel, Field
from scipy.integrate import cumulative_trapezoid

from .errors import ContractViolation, InsufficientDataError
from .flows import StructuredProblem
from .integrate import Trajectory
from .model import PrimalDualState, SaddlePoint, SaddleProblem, lagrangian, lagrangian_grad

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-300
MIN_FIT_POINTS = 5

FitMode = Literal["raw", "envelope", "poly-corrected"]
Regime = Literal["under", "critical", "over"]


# ============================================================================
# Series
# ============================================================================

@dataclass(frozen=True)
class DiagnosticsSeries:
    """Per-sample diagnostics anchored at a saddle point (xi, eta).

    cesaro_state and cesaro_gap are NaN at the first sample, where the
    running average is undefined.
    """
    times: np.ndarray
    gap: np.ndarray
    vel_sq: np.ndarray
    err_sq_full: np.ndarray
    err_sq_primal: np.ndarray
    err_sq_dual: np.ndarray
    cesaro_state: np.ndarray
    cesaro_gap: np.ndarray


def _anchor_problem(p: Union[SaddleProblem, StructuredProblem]) -> SaddleProblem:
    return p.combined() if isinstance(p, StructuredProblem) else p


def _positions(traj: Trajectory) -> Tuple[np.ndarray, np.ndarray]:
    """(positions, velocities) as (k, n+p+m) arrays for any flow"""
    n, p, m = traj.blocks
    d = n + p + m
    if traj.second_order:
        return traj.states[:, :d], traj.states[:, d:]
    return traj.states, traj.derivatives


def anchored_gap(p: SaddleProblem, x: np.ndarray, lam: np.ndarray, sp: SaddlePoint) -> float:
    """L(x, eta) - L(xi, lam)"""
    return lagrangian(p, PrimalDualState(x=x, lam=sp.eta)) - lagrangian(p, PrimalDualState(x=sp.xi, lam=lam))


def diagnostics_series(
    p: Union[SaddleProblem, StructuredProblem],
    traj: Trajectory,
    sp: SaddlePoint,
) -> DiagnosticsSeries:
    """
    Gap, velocity, error and Cesaro series of a trajectory.

    For structured problems sp is the saddle point of the stacked problem,
    so xi holds (xi, psi) and all norms run over the three blocks.
    """
    problem = _anchor_problem(p)
    positions, velocities = _positions(traj)
    n_primal = problem.n
    if positions.shape[1] != n_primal + problem.m:
        raise ContractViolation(
            f"trajectory blocks {traj.blocks} do not match problem sizes ({problem.n}, {problem.m})"
        )
    x, lam = positions[:, :n_primal], positions[:, n_primal:]

    gap = np.array([anchored_gap(problem, xi, li, sp) for xi, li in zip(x, lam)])
    vel_sq = np.sum(velocities ** 2, axis=1)
    err_primal = np.sum((x - sp.xi) ** 2, axis=1)
    err_dual = np.sum((lam - sp.eta) ** 2, axis=1)

    times = traj.times
    elapsed = times - times[0]
    integral = cumulative_trapezoid(positions, times, axis=0, initial=0.0)
    cesaro_state = np.full_like(positions, np.nan)
    cesaro_state[1:] = integral[1:] / elapsed[1:, None]
    cesaro_gap = np.full(times.shape[0], np.nan)
    for i in range(1, times.shape[0]):
        sigma, omega = cesaro_state[i, :n_primal], cesaro_state[i, n_primal:]
        cesaro_gap[i] = anchored_gap(problem, sigma, omega, sp)

    return DiagnosticsSeries(
        times=times,
        gap=gap,
        vel_sq=vel_sq,
        err_sq_full=err_primal + err_dual,
        err_sq_primal=err_primal,
        err_sq_dual=err_dual,
        cesaro_state=cesaro_state,
        cesaro_gap=cesaro_gap,
    )


def cesaro_bound_check(ds: DiagnosticsSeries, z0_err_sq: float) -> float:
    """
    max over t > t_start of (t - t_start) * cesaro_gap(t) - z0_err_sq / 2.

    A value <= 1e-6 certifies the ergodic O(1/t) bound.
    """
    elapsed = ds.times[1:] - ds.times[0]
    if elapsed.size == 0:
        return -0.5 * z0_err_sq
    return float(np.max(elapsed * ds.cesaro_gap[1:]) - 0.5 * z0_err_sq)


def lagrangian_identity_residual(p: SaddleProblem, z: PrimalDualState, zdot: np.ndarray) -> float:
    """|<grad_x L, x'> + <grad_lambda L, lambda'> + |x'|^2 - |lambda'|^2|"""
    gx, gl = lagrangian_grad(p, z)
    zdot = np.asarray(zdot, dtype=float)
    xdot, lamdot = zdot[:p.n], zdot[p.n:]
    return abs(float(gx @ xdot + gl @ lamdot + xdot @ xdot - lamdot @ lamdot))


def monotonicity_violations(series: np.ndarray, tol: float) -> Tuple[int, float]:
    """
    Count indices with s[i+1] > s[i] + tol * (1 + |s[i]|).

    Returns:
        (count, worst jump s[i+1] - s[i] among the violations, 0.0 if none)
    """
    s = np.asarray(series, dtype=float)
    s = s[np.isfinite(s)]
    if s.size < 2:
        return 0, 0.0
    jumps = s[1:] - s[:-1]
    bad = jumps > tol * (1.0 + np.abs(s[:-1]))
    worst = float(np.max(jumps[bad])) if np.any(bad) else 0.0
    return int(np.count_nonzero(bad)), worst


def combined_bound_series(
    p: SaddleProblem,
    traj: Trajectory,
    sp: SaddlePoint,
    beta: float,
) -> np.ndarray:
    """beta |z - z*|^2 - |A(x - xi)|^2 - |A'(lambda - eta)|^2 per sample"""
    positions, _ = _positions(traj)
    dx = positions[:, :p.n] - sp.xi
    dl = positions[:, p.n:] - sp.eta
    return (
        beta * (np.sum(dx ** 2, axis=1) + np.sum(dl ** 2, axis=1))
        - np.sum((dx @ p.A.T) ** 2, axis=1)
        - np.sum((dl @ p.A) ** 2, axis=1)
    )


def tail_ratio(times: np.ndarray, values: np.ndarray, t_ref: float, t_end: float, power: float = 0.5) -> float:
    """(t_end^power v(t_end)) / (t_ref^power v(t_ref)) using the nearest samples"""
    times = np.asarray(times)
    values = np.asarray(values)
    i_ref = int(np.argmin(np.abs(times - t_ref)))
    i_end = int(np.argmin(np.abs(times - t_end)))
    ref = times[i_ref] ** power * values[i_ref]
    end = times[i_end] ** power * values[i_end]
    if ref == 0:
        return 0.0 if end == 0 else math.inf
    return float(end / ref)


# ============================================================================
# Rate fitting
# ============================================================================

class RateFit(BaseModel):
    """Least-squares line through (t, log value) on a window"""
    window: Tuple[float, float] = Field(..., description="Fit window [t_lo, t_hi]")
    slope: float = Field(..., description="Slope of log(value) per unit time")
    intercept: float
    r_squared: float = Field(..., ge=0.0, le=1.0)
    mode: FitMode = "raw"
    poly_power: int = Field(default=0, ge=0, description="k in poly-corrected(k)")
    points: int = Field(..., ge=MIN_FIT_POINTS, description="Samples used in the fit")

    @property
    def rate(self) -> float:
        return -self.slope


def _ols_line(t: np.ndarray, y: np.ndarray):
    return sm.OLS(y, sm.add_constant(t, has_constant="add")).fit()


def suffix_records(values: np.ndarray) -> np.ndarray:
    """Mask of samples strictly larger than every later sample"""
    v = np.where(np.isfinite(values), values, -np.inf)
    later_max = np.append(np.maximum.accumulate(v[::-1])[::-1][1:], -np.inf)
    return v > later_max


def envelope_indices(times: np.ndarray, values: np.ndarray, usable: np.ndarray) -> np.ndarray:
    """
    Indices of upper-envelope peaks among the usable samples.

    log(values) is detrended by a first line fitted through the suffix
    records, then the peaks are the local maxima of the detrended series
    that are also suffix records. Noise inside near-zero troughs is never a
    record, and series that decay monotonically with a ripple still show one
    peak per ripple after detrending.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    records = suffix_records(v)
    first = np.nonzero(usable & records)[0]
    if first.size < 2:
        return first
    trend = float(_ols_line(t[first], np.log(v[first])).params[1])

    positive = np.isfinite(v) & (v > LOG_FLOOR)
    r = np.full(v.shape[0], -np.inf)
    r[positive] = np.log(v[positive]) - trend * t[positive]
    peak = np.zeros(v.shape[0], dtype=bool)
    peak[1:-1] = (r[1:-1] > r[:-2]) & (r[1:-1] >= r[2:])
    return np.nonzero(peak & records & usable)[0]


def default_window(horizon: float) -> Tuple[float, float]:
    return 0.5 * horizon, 0.9 * horizon


def fit_rate(
    times: np.ndarray,
    values: np.ndarray,
    window: Optional[Tuple[float, float]] = None,
    mode: FitMode = "raw",
    poly_power: int = 2,
) -> RateFit:
    """
    Fit log(values) ~ intercept + slope * t on a time window.

    Modes:
    - raw: every sample in the window
    - envelope: only upper-envelope peaks (for oscillating series)
    - poly-corrected: fits log(values) - poly_power * log(t)

    Raises:
        InsufficientDataError: fewer than 5 usable samples.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if window is None:
        window = default_window(float(t[-1]))
    t_lo, t_hi = window
    if not t_lo < t_hi:
        raise ContractViolation(f"empty fit window [{t_lo}, {t_hi}]")

    k = poly_power if mode == "poly-corrected" else 0
    usable = (t >= t_lo) & (t <= t_hi) & np.isfinite(v) & (v > LOG_FLOOR)
    if k:
        usable &= t > 0
    if mode == "envelope":
        idx = envelope_indices(t, v, usable)
    else:
        idx = np.nonzero(usable)[0]
    if idx.size < MIN_FIT_POINTS:
        raise InsufficientDataError(f"{idx.size} usable samples in [{t_lo:g}, {t_hi:g}] ({mode})")

    t_fit = t[idx]
    y = np.log(v[idx])
    if k:
        y = y - k * np.log(t_fit)
    result = _ols_line(t_fit, y)
    intercept, slope = (float(c) for c in result.params)
    r_squared = float(result.rsquared) if np.isfinite(result.rsquared) else 1.0
    return RateFit(
        window=(float(t_lo), float(t_hi)),
        slope=slope,
        intercept=intercept,
        r_squared=min(max(r_squared, 0.0), 1.0),
        mode=mode,
        poly_power=k,
        points=int(idx.size),
    )


# ============================================================================
# Theoretical rates
# ============================================================================

class TheoreticalRates(BaseModel):
    """Predicted exponential rates from (alpha, beta, gamma)"""
    rho: float = Field(..., gt=0.0)
    case_discriminant: float = Field(..., description="rho^2 - gamma rho + beta")
    case: Literal["i", "ii"] = Field(..., description="i: discriminant > 0, ii: discriminant = 0")
    regime: Optional[Regime] = Field(default=None, description="Damping regime when the Hessian is alpha * identity")
    delta: Optional[float] = Field(default=None, description="sqrt(alpha^2 - 4 beta) in the over-damped regime")
    predicted_decay_exponent: float = Field(..., description="Exponent c in O(t^k e^{-c t}) for the squared error")
    poly_power: int = Field(default=0, description="k in O(t^k e^{-c t})")

    model_config = {
        "json_schema_extra": {
            "example": {
                "rho": 0.25,
                "case_discriminant": 0.6875,
                "case": "i",
                "regime": None,
                "delta": None,
                "predicted_decay_exponent": 0.5,
                "poly_power": 0,
            }
        }
    }


def theoretical_rates(
    alpha: float,
    beta: float,
    gamma: float,
    scalar_hessian: bool = False,
    tol: float = 1e-12,
) -> TheoreticalRates:
    """
    rho = alpha/2 if gamma^2 <= 4 beta, else min(alpha, gamma - sqrt(gamma^2 - 4 beta)) / 2.

    With a scalar Hessian (gamma = alpha) the damping regime refines the
    squared-error exponent: under -> alpha, critical -> alpha with a t^2
    factor, over -> alpha - delta.
    """
    if min(alpha, beta, gamma) <= 0:
        raise ContractViolation("alpha, beta and gamma must be positive")
    if gamma ** 2 <= 4.0 * beta:
        rho = alpha / 2.0
    else:
        rho = min(alpha, gamma - math.sqrt(gamma ** 2 - 4.0 * beta)) / 2.0
    disc = rho ** 2 - gamma * rho + beta
    case = "ii" if abs(disc) <= tol * max(1.0, beta) else "i"
    exponent = 2.0 * rho
    power = 2 if case == "ii" else 0
    regime = None
    delta = None

    if scalar_hessian:
        split = alpha ** 2 - 4.0 * beta
        if abs(split) <= tol * max(1.0, alpha ** 2):
            regime, exponent, power = "critical", alpha, 2
        elif split < 0:
            regime, exponent, power = "under", alpha, 0
        else:
            delta = math.sqrt(split)
            regime, exponent, power = "over", alpha - delta, 0

    return TheoreticalRates(
        rho=rho,
        case_discriminant=disc,
        case=case,
        regime=regime,
        delta=delta,
        predicted_decay_exponent=exponent,
        poly_power=power,
    )


def exp_bound_supremum(
    times: np.ndarray,
    values: np.ndarray,
    rate: float,
    return_time: bool = False,
) -> Union[float, Tuple[float, float]]:
    """
    sup over samples of exp(rate * t) * values(t), evaluated in log space.

    A finite supremum over the horizon certifies values = O(exp(-rate t)) at
    desk scale. With return_time the sample time attaining it is returned too.
    """
    if rate <= 0:
        raise ContractViolation(f"rate must be positive, got {rate}")
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    positive = np.isfinite(v) & (v > 0)
    if not np.any(positive):
        return (0.0, float(t[0])) if return_time else 0.0
    logs = np.full(t.shape[0], -np.inf)
    logs[positive] = rate * t[positive] + np.log(v[positive])
    i = int(np.argmax(logs))
    sup = math.exp(logs[i]) if logs[i] < 709.0 else math.inf
    return (sup, float(t[i])) if return_time else sup
