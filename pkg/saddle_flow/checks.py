"""
Invariant suite behind `saddle-flow validate`.

Each check returns PASS, FAIL or SKIP (the problem lacks the structure the
check needs, e.g. no scalar Hessian for the oscillator residual). Every
check runs; the caller names the first failure.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Literal, Optional

import numpy as np

from .diagnostics import (
    DiagnosticsSeries,
    cesaro_bound_check,
    combined_bound_series,
    diagnostics_series,
    exp_bound_supremum,
    fit_rate,
    lagrangian_identity_residual,
    monotonicity_violations,
    theoretical_rates,
)
from .errors import SaddleFlowError, UnsupportedOperationError
from .experiments.problems import ProblemInstance
from .flows import ah_field, ah_vector_field, oscillator_residual_primal, primal_acceleration
from .integrate import (
    IntegratorConfig,
    Trajectory,
    field_matrix,
    integrate,
    linear_flow_oracle,
    slowest_decay_exponent,
    slowest_decay_multiplicity,
)
from .model import (
    PrimalDualState,
    condition_c_residual,
    multiplier_projection,
    operator_constants,
    strong_monotonicity_slack,
)

logger = logging.getLogger(__name__)

Status = Literal["PASS", "FAIL", "SKIP"]

IDENTITY_TOL = 1e-12
GAP_TOL = 1e-9
CESARO_TOL = 1e-6
OSCILLATOR_TOL = 1e-8
RATE_TOL = 0.05
ERR_FLOOR = 1e-12
# cap on the exp(2 alpha t) weight applied to the combined bound
COMBINED_GROWTH = 1e6
COMBINED_TOL = 1e-4
DUAL_GROWTH = 2.0
TAIL_MIN_HORIZON = 40.0
TAIL_RATIO = 0.1


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: Status
    detail: str = ""

    @property
    def failed(self) -> bool:
        return self.status == "FAIL"


def first_failure(results: List[CheckResult]) -> Optional[CheckResult]:
    return next((r for r in results if r.failed), None)


def _verdict(name: str, ok: bool, detail: str) -> CheckResult:
    return CheckResult(name=name, status="PASS" if ok else "FAIL", detail=detail)


# ============================================================================
# State checks (no integration)
# ============================================================================

def check_saddle(instance: ProblemInstance) -> CheckResult:
    sp = instance.saddle
    worst = max(sp.stationarity_residual, sp.feasibility_residual)
    return _verdict("certified-saddle", sp.certified, f"max KKT residual {worst:.3e}")


def check_identity_at_random_states(instance: ProblemInstance, samples: int, rng: np.random.Generator) -> CheckResult:
    p = instance.problem
    worst = 0.0
    for _ in range(samples):
        z = PrimalDualState(x=rng.standard_normal(p.n) * 2.0, lam=rng.standard_normal(p.m) * 2.0)
        zdot = ah_field(p, z)
        worst = max(worst, lagrangian_identity_residual(p, z, zdot) / (1.0 + float(zdot @ zdot)))
    return _verdict("lagrangian-identity", worst <= IDENTITY_TOL, f"worst scaled residual {worst:.3e} over {samples} states")


def check_strong_monotonicity(instance: ProblemInstance, samples: int, rng: np.random.Generator) -> CheckResult:
    p = instance.problem
    worst = np.inf
    for _ in range(samples):
        z = PrimalDualState(x=rng.standard_normal(p.n), lam=rng.standard_normal(p.m))
        w = PrimalDualState(x=rng.standard_normal(p.n), lam=rng.standard_normal(p.m))
        worst = min(worst, strong_monotonicity_slack(p, z, w, instance.alpha))
    return _verdict("strong-monotonicity", worst >= -1e-9, f"smallest slack {worst:.3e}")


def check_condition_c(instance: ProblemInstance, samples: int, rng: np.random.Generator) -> CheckResult:
    o = instance.problem.objective
    try:
        worst = max(
            abs(condition_c_residual(o, rng.standard_normal(o.dim), rng.standard_normal(o.dim)))
            for _ in range(samples)
        )
    except UnsupportedOperationError as e:
        return CheckResult("condition-c", "SKIP", str(e))
    return _verdict("condition-c", worst <= 1e-9, f"largest |residual| {worst:.3e} (quadratics hold it with equality)")


# ============================================================================
# Trajectory checks
# ============================================================================

def check_gap(ds: DiagnosticsSeries) -> CheckResult:
    low = float(np.min(ds.gap))
    return _verdict("gap-nonnegative", low >= -GAP_TOL, f"min gap {low:.3e}")


def check_monotone(name: str, series: np.ndarray, tol: float) -> CheckResult:
    count, worst = monotonicity_violations(series, tol)
    return _verdict(name, count == 0, f"{count} violations, worst jump {worst:.3e}")


def check_cesaro(ds: DiagnosticsSeries) -> CheckResult:
    excess = cesaro_bound_check(ds, float(ds.err_sq_full[0]))
    return _verdict("cesaro-bound", excess <= CESARO_TOL, f"max t*cesaro_gap - |z0-z*|^2/2 = {excess:.3e}")


def check_identity_along(instance: ProblemInstance, traj: Trajectory) -> CheckResult:
    p = instance.problem
    worst = 0.0
    for z, zdot in zip(traj.states, traj.derivatives):
        state = PrimalDualState.from_vector(z, p.n, p.m)
        worst = max(worst, lagrangian_identity_residual(p, state, zdot) / (1.0 + float(zdot @ zdot)))
    return _verdict("lagrangian-identity-trajectory", worst <= IDENTITY_TOL, f"worst scaled residual {worst:.3e}")


def check_linear_oracle(instance: ProblemInstance, traj: Trajectory) -> CheckResult:
    try:
        exact = linear_flow_oracle(instance.problem, instance.z0, float(traj.times[-1]))
    except UnsupportedOperationError as e:
        return CheckResult("linear-oracle", "SKIP", str(e))
    err = float(np.linalg.norm(traj.final_state - exact))
    tol = 1e-6 * (1.0 + float(np.linalg.norm(instance.z0)))
    return _verdict("linear-oracle", err <= tol, f"terminal error {err:.3e} (tol {tol:.1e})")


def check_projection_limit(instance: ProblemInstance, traj: Trajectory) -> CheckResult:
    p = instance.problem
    speed = float(np.linalg.norm(traj.derivatives[-1]))
    if speed > 1e-6:
        return CheckResult("projection-limit", "SKIP", f"not settled at T, |z'(T)| = {speed:.1e}")
    xi = instance.saddle.xi
    target = np.concatenate([xi, multiplier_projection(p, xi, instance.lambda0)])
    err = float(np.linalg.norm(traj.final_state - target))
    return _verdict("projection-limit", err <= 1e-4, f"|z(T) - proj(z0)| = {err:.3e}")


def check_oscillator(instance: ProblemInstance, traj: Trajectory) -> CheckResult:
    p = instance.problem
    if p.objective.scalar_hessian() is None:
        return CheckResult("oscillator", "SKIP", "Hessian is not a multiple of the identity")
    n = p.n
    xi = instance.saddle.xi
    worst = 0.0
    for z, zdot in zip(traj.states, traj.derivatives):
        xddot = primal_acceleration(p, zdot[:n], zdot[n:])
        worst = max(worst, oscillator_residual_primal(p, z[:n], zdot[:n], xddot, xi))
    return _verdict("oscillator", worst <= OSCILLATOR_TOL, f"sup residual {worst:.3e}")


def check_rate(instance: ProblemInstance, traj: Trajectory) -> CheckResult:
    """
    Fitted squared-error rate against the slowest decaying eigenvalue of the
    field matrix. The error is measured to the limit of the run (the
    projection of z0), which differs from the anchored saddle when the
    multipliers are not unique.
    """
    p = instance.problem
    try:
        M, _ = field_matrix(p)
        expected = slowest_decay_exponent(M)
    except UnsupportedOperationError as e:
        return CheckResult("rate-consistency", "SKIP", str(e))

    xi = instance.saddle.xi
    limit = np.concatenate([xi, multiplier_projection(p, xi, instance.lambda0)])
    err_sq = np.sum((traj.states - limit) ** 2, axis=1)
    times = traj.times
    above = np.nonzero(err_sq >= ERR_FLOOR * (1.0 + float(err_sq[0])))[0]
    t_hi = min(0.9 * float(times[-1]), float(times[above[-1]])) if above.size else 0.0
    if t_hi <= 0:
        return CheckResult("rate-consistency", "SKIP", "error below the floor from the start")
    window = (0.5 * t_hi, t_hi)
    # a repeated slowest eigenvalue puts a t^2 factor in front of the exponential
    modes = ("poly-corrected",) if slowest_decay_multiplicity(M) > 1 else ("envelope", "raw")
    fit = None
    for mode in modes:
        try:
            fit = fit_rate(times, err_sq, window, mode, poly_power=2)
            break
        except SaddleFlowError:
            continue
    if fit is None or fit.r_squared < 0.99:
        return CheckResult("rate-consistency", "SKIP", "no clean log-linear window")
    rel = abs(fit.rate - expected) / expected
    return _verdict("rate-consistency", rel <= RATE_TOL, f"fitted {fit.rate:.5f} vs eigenvalue {expected:.5f} ({fit.mode})")


def _dual_estimates_skip(instance: ProblemInstance) -> Optional[str]:
    """Reason to skip the dual estimates, or None when they apply"""
    if instance.problem.objective.scalar_hessian() is None:
        return "Hessian is not a multiple of the identity"
    if instance.beta <= 0:
        return "A* is not bounded below"
    return None


def check_combined_bound(instance: ProblemInstance, traj: Trajectory) -> CheckResult:
    """
    exp(2 alpha t) * (beta |z - z*|^2 - |A(x - xi)|^2 - |A'(lambda - eta)|^2)
    never exceeds its initial value.

    Only the early part of the run is weighed, while exp(2 alpha t) stays
    below COMBINED_GROWTH.
    """
    reason = _dual_estimates_skip(instance)
    if reason:
        return CheckResult("combined-bound", "SKIP", reason)
    alpha = float(instance.problem.objective.scalar_hessian())
    series = combined_bound_series(instance.problem, traj, instance.saddle, instance.beta)
    elapsed = traj.times - traj.times[0]
    early = elapsed <= math.log(COMBINED_GROWTH) / (2.0 * alpha)
    start = float(series[0])
    sup = exp_bound_supremum(elapsed[early], series[early], 2.0 * alpha)
    excess = sup - max(start, 0.0)
    return _verdict(
        "combined-bound",
        excess <= COMBINED_TOL * (1.0 + abs(start)),
        f"sup exp(2 alpha t) * bound = {sup:.6g}, initial {start:.6g}",
    )


def check_dual_rate(instance: ProblemInstance, ds: DiagnosticsSeries) -> CheckResult:
    """
    |lambda - eta|^2 = O(t^k exp(-c t)) with (c, k) from the damping regime.

    exp(c t) |lambda - eta|^2 / (1 + t)^k must stay bounded: its supremum over
    the second half of the resolved run is compared with the first half.
    """
    reason = _dual_estimates_skip(instance)
    if reason:
        return CheckResult("dual-rate", "SKIP", reason)
    alpha = float(instance.problem.objective.scalar_hessian())
    rates = theoretical_rates(alpha, instance.beta, alpha, scalar_hessian=True)
    c, k = rates.predicted_decay_exponent, rates.poly_power

    t = ds.times - ds.times[0]
    err = ds.err_sq_dual
    above = np.nonzero(err >= ERR_FLOOR * (1.0 + float(err[0])))[0]
    t_hi = min(0.9 * float(t[-1]), float(t[above[-1]])) if above.size else 0.0
    if t_hi <= 0:
        return CheckResult("dual-rate", "SKIP", "dual error below the floor from the start")
    scaled = err / (1.0 + t) ** k
    first = t <= 0.5 * t_hi
    second = (t > 0.5 * t_hi) & (t <= t_hi)
    early = exp_bound_supremum(t[first], scaled[first], c)
    late = exp_bound_supremum(t[second], scaled[second], c)
    if early <= 0:
        return CheckResult("dual-rate", "SKIP", "dual error vanishes on the first half")
    ratio = late / early
    return _verdict(
        "dual-rate",
        ratio <= DUAL_GROWTH,
        f"late/early sup of exp({c:.5f} t) |lambda-eta|^2 / (1+t)^{k} = {ratio:.4f} ({rates.regime})",
    )


def check_primal_tail(instance: ProblemInstance, ds: DiagnosticsSeries) -> CheckResult:
    """
    With A bounded below, sqrt(t) |x - xi| and t * gap tend to zero.

    Their suprema over the last quarter of the run must drop below
    TAIL_RATIO times their suprema over [1, T/4].
    """
    if operator_constants(instance.problem.constraint).beta_primal <= 0:
        return CheckResult("primal-tail", "SKIP", "A is not bounded below")
    t = ds.times
    horizon = float(t[-1])
    if horizon < TAIL_MIN_HORIZON:
        return CheckResult("primal-tail", "SKIP", f"horizon {horizon:g} < {TAIL_MIN_HORIZON:g}")
    early = (t >= 1.0) & (t <= 0.25 * horizon)
    late = t >= 0.75 * horizon
    worst = 0.0
    for series in (np.sqrt(t * ds.err_sq_primal), t * ds.gap):
        e, l = float(np.max(series[early])), float(np.max(series[late]))
        if l > TAIL_RATIO * e + 1e-12:
            return _verdict("primal-tail", False, f"late sup {l:.3e} vs early sup {e:.3e}")
        worst = max(worst, l / e if e > 0 else 0.0)
    return _verdict("primal-tail", True, f"largest late/early ratio {worst:.3e}")


# ============================================================================
# Suite
# ============================================================================

def run_checks(
    instance: ProblemInstance,
    cfg: Optional[IntegratorConfig] = None,
    samples: int = 1000,
    seed: int = 0,
) -> List[CheckResult]:
    """Run every invariant check on one instance and an AH trajectory from its reference data"""
    cfg = cfg or IntegratorConfig(method="adaptive-dp54", rtol=1e-9, atol=1e-12, horizon=50.0)
    rng = np.random.Generator(np.random.PCG64(seed))

    results = [
        check_saddle(instance),
        check_identity_at_random_states(instance, samples, rng),
        check_strong_monotonicity(instance, min(samples, 200), rng),
        check_condition_c(instance, min(samples, 200), rng),
    ]

    p = instance.problem
    try:
        traj = integrate(ah_vector_field(p), instance.z0, 0.0, cfg, flow="ah", blocks=(p.n, 0, p.m))
    except SaddleFlowError as e:
        results.append(CheckResult("integration", "FAIL", str(e)))
        return results
    ds = diagnostics_series(p, traj, instance.saddle)

    trajectory_checks: List[Callable[[], CheckResult]] = [
        lambda: check_gap(ds),
        lambda: check_monotone("velocity-monotone", ds.vel_sq, 1e-9),
        lambda: check_monotone("distance-monotone", ds.err_sq_full, 1e-9),
        lambda: check_cesaro(ds),
        lambda: check_identity_along(instance, traj),
        lambda: check_linear_oracle(instance, traj),
        lambda: check_projection_limit(instance, traj),
        lambda: check_oscillator(instance, traj),
        lambda: check_rate(instance, traj),
        lambda: check_combined_bound(instance, traj),
        lambda: check_dual_rate(instance, ds),
        lambda: check_primal_tail(instance, ds),
    ]
    results.extend(check() for check in trajectory_checks)
    for r in results:
        logger.debug(f"{r.status} {r.name}: {r.detail}")
    return results
