"""
Single experiment runs: resolve the problem, integrate the chosen flow,
compute diagnostics, fit a rate and write the per-curve artifact.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..diagnostics import (
    DiagnosticsSeries,
    FitMode,
    RateFit,
    default_window,
    diagnostics_series,
    fit_rate,
    theoretical_rates,
)
from ..errors import ContractViolation, DimensionError, InsufficientDataError
from ..flows import AahParams, aah_initial_state, aah_vector_field, ah_vector_field, gah_vector_field
from ..integrate import IntegratorConfig, Trajectory, integrate
from ..model import SaddlePoint, kkt_solve, load_problem
from .problems import PROBLEMS, ProblemInstance, get_problem, instance_from_problem, structured_lift

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["t", "gap", "vel_sq", "err_sq_full", "err_sq_primal", "cesaro_gap"]

# Power k in the O(1/t^k) decay predicted for the accelerated system
AAH_POWER = 2.0

Flow = Literal["ah", "gah", "aah"]


# ============================================================================
# Models
# ============================================================================

class ExperimentSpec(BaseModel):
    """One curve: problem, flow, initial data, integrator and fit settings"""
    curve: str = Field(default="run", description="Curve id, also the output file stem")
    problem: str = Field(default="example1", description="Built-in problem id")
    problem_file: Optional[str] = Field(default=None, description="JSON problem file, overrides problem")
    alpha: float = Field(default=1.0, gt=0.0, description="alpha for example2")
    seed: int = Field(default=0, ge=0, description="Seed for random-qp")
    flow: Flow = Field(default="ah", description="Dynamical system to integrate")
    aah: AahParams = Field(default_factory=AahParams, description="AAH parameters (flow=aah only)")
    x0: Optional[List[float]] = Field(default=None, description="Initial x, defaults to the reference data")
    lambda0: Optional[List[float]] = Field(default=None, description="Initial multiplier")
    y0: Optional[List[float]] = Field(default=None, description="Initial y of the structured lift (zero)")
    v0: Optional[List[float]] = Field(default=None, description="AAH initial x velocity (zero)")
    w0: Optional[List[float]] = Field(default=None, description="AAH initial y velocity (zero)")
    mu0: Optional[List[float]] = Field(default=None, description="AAH initial multiplier velocity (zero)")
    lift_dim: int = Field(default=1, ge=1, description="Dimension of y in the structured lift")
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    window: Optional[Tuple[float, float]] = Field(default=None, description="Fit window, defaults to [T/2, 0.9 T]")
    fit_mode: FitMode = Field(default="raw", description="Rate fit mode for err_sq_full")
    poly_power: int = Field(default=2, ge=0, description="k for poly-corrected fits")
    out_dir: Optional[str] = Field(default=None, description="Directory for the curve file")
    format: Literal["csv", "json"] = Field(default="csv", description="Curve file format")

    model_config = {
        "json_schema_extra": {
            "example": {
                "curve": "example1-ah",
                "problem": "example1",
                "flow": "ah",
                "integrator": {"method": "adaptive-dp54", "rtol": 1e-9, "horizon": 50.0},
                "window": [20.0, 40.0],
                "fit_mode": "envelope",
                "out_dir": "./out",
            }
        }
    }

    @model_validator(mode="after")
    def check_problem(self) -> "ExperimentSpec":
        if self.problem_file is None and self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem '{self.problem}', expected one of {sorted(PROBLEMS)}")
        if self.flow == "aah" and self.integrator.horizon <= self.aah.t0:
            raise ValueError(f"horizon {self.integrator.horizon} must exceed t0={self.aah.t0}")
        return self


class CurveSummary(BaseModel):
    """One row of summary.json"""
    curve: str
    fitted_rate: Optional[float] = Field(default=None, description="Negated fitted slope")
    theoretical_rate: Optional[float] = Field(default=None, description="Predicted decay exponent")
    r_squared: Optional[float] = None
    regime: Optional[str] = Field(default=None, description="under / critical / over / case-i / case-ii / algebraic")

    model_config = {
        "json_schema_extra": {
            "example": {
                "curve": "fig2-alpha3-err_sq_full",
                "fitted_rate": 0.7639,
                "theoretical_rate": 0.7639320225002102,
                "r_squared": 1.0,
                "regime": "over",
            }
        }
    }


@dataclass(frozen=True)
class CurveResult:
    """Everything one run produced"""
    spec: ExperimentSpec
    instance: ProblemInstance
    anchor: SaddlePoint
    trajectory: Trajectory
    series: DiagnosticsSeries
    summary: CurveSummary
    path: Optional[Path] = None


# ============================================================================
# Running
# ============================================================================

def _vector_or(values: Optional[List[float]], default: np.ndarray, name: str) -> np.ndarray:
    v = default if values is None else np.asarray(values, dtype=float)
    if v.shape != default.shape:
        raise DimensionError(f"{name} has length {v.shape[0]}, expected {default.shape[0]}")
    return v


def resolve_instance(spec: ExperimentSpec) -> ProblemInstance:
    """Built-in or file problem with the spec's initial data applied"""
    if spec.problem_file is not None:
        base = instance_from_problem(Path(spec.problem_file).stem, load_problem(spec.problem_file))
    else:
        base = get_problem(spec.problem, alpha=spec.alpha, seed=spec.seed)
    x0 = _vector_or(spec.x0, base.x0, "x0")
    lambda0 = _vector_or(spec.lambda0, base.lambda0, "lambda0")
    return ProblemInstance(
        name=base.name,
        problem=base.problem,
        saddle=base.saddle,
        x0=x0,
        lambda0=lambda0,
        alpha=base.alpha,
        gamma=base.gamma,
        beta=base.beta,
    )


def simulate(spec: ExperimentSpec, instance: ProblemInstance) -> Tuple[Trajectory, DiagnosticsSeries, SaddlePoint]:
    """Integrate spec.flow from the instance's initial data and compute the diagnostics"""
    p = instance.problem
    cfg = spec.integrator
    if spec.flow == "ah":
        traj = integrate(ah_vector_field(p), instance.z0, 0.0, cfg, flow="ah", blocks=(p.n, 0, p.m))
        return traj, diagnostics_series(p, traj, instance.saddle), instance.saddle

    lift = structured_lift(p, spec.lift_dim)
    anchor = kkt_solve(lift.combined())
    y0 = _vector_or(spec.y0, np.zeros(lift.p), "y0")
    blocks = (lift.n, lift.p, lift.m)
    if spec.flow == "gah":
        z0 = np.concatenate([instance.x0, y0, instance.lambda0])
        traj = integrate(gah_vector_field(lift), z0, 0.0, cfg, flow="gah", blocks=blocks)
    else:
        state = aah_initial_state(
            lift,
            instance.x0,
            y0,
            instance.lambda0,
            v0=_vector_or(spec.v0, np.zeros(lift.n), "v0"),
            w0=_vector_or(spec.w0, np.zeros(lift.p), "w0"),
            mu0=_vector_or(spec.mu0, np.zeros(lift.m), "mu0"),
        )
        traj = integrate(
            aah_vector_field(lift, spec.aah),
            state.vector,
            spec.aah.t0,
            cfg,
            flow="aah",
            blocks=blocks,
            second_order=True,
        )
    return traj, diagnostics_series(lift, traj, anchor), anchor


def summarize(
    curve: str,
    times: np.ndarray,
    values: np.ndarray,
    window: Tuple[float, float],
    mode: FitMode,
    poly_power: int = 2,
    theoretical_rate: Optional[float] = None,
    regime: Optional[str] = None,
    algebraic: bool = False,
) -> CurveSummary:
    """
    Fit one series and pair it with its prediction.

    With algebraic the fit runs against log t, so the reported rate is the
    exponent k in O(1/t^k).
    """
    try:
        if algebraic:
            fit: RateFit = fit_rate(np.log(times), values, (math.log(window[0]), math.log(window[1])), mode)
        else:
            fit = fit_rate(times, values, window, mode, poly_power)
    except InsufficientDataError as e:
        logger.warning(f"⚠️  No rate for {curve}: {e}")
        return CurveSummary(curve=curve, theoretical_rate=theoretical_rate, regime=regime)
    return CurveSummary(
        curve=curve,
        fitted_rate=fit.rate,
        theoretical_rate=theoretical_rate,
        r_squared=fit.r_squared,
        regime=regime,
    )


def predicted(instance: ProblemInstance) -> Tuple[Optional[float], Optional[str]]:
    """(predicted err_sq exponent, regime label) or (None, None) without a dual bound"""
    if instance.beta <= 0:
        return None, None
    rates = theoretical_rates(
        instance.alpha,
        instance.beta,
        instance.gamma,
        scalar_hessian=instance.problem.objective.scalar_hessian() is not None,
    )
    return rates.predicted_decay_exponent, rates.regime or f"case-{rates.case}"


def format_value(v: float) -> str:
    return format(float(v), ".17g")


def write_curve_csv(path: Path, series: DiagnosticsSeries) -> Path:
    """Header t,gap,vel_sq,err_sq_full,err_sq_primal,cesaro_gap; 17 significant digits"""
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = [series.times, series.gap, series.vel_sq, series.err_sq_full, series.err_sq_primal, series.cesaro_gap]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in zip(*columns):
            w.writerow([format_value(v) for v in row])
    return path


def write_curve_json(path: Path, series: DiagnosticsSeries, summary: CurveSummary) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = [series.times, series.gap, series.vel_sq, series.err_sq_full, series.err_sq_primal, series.cesaro_gap]
    payload = {
        "summary": summary.model_dump(),
        "series": {
            name: [None if not math.isfinite(v) else float(v) for v in values]
            for name, values in zip(CSV_COLUMNS, columns)
        },
    }
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path


def run_experiment(spec: ExperimentSpec) -> CurveResult:
    """
    Run one ExperimentSpec end to end.

    The err_sq_full series is fitted on spec.window (AAH runs are fitted as
    a power of t) and the curve file is written when out_dir is set.
    """
    instance = resolve_instance(spec)
    logger.info(f"🚀 {spec.curve}: {spec.flow} on {instance.name}, T={spec.integrator.horizon:g}")
    traj, series, anchor = simulate(spec, instance)

    horizon = float(series.times[-1])
    if spec.flow == "aah":
        window = spec.window or (max(spec.aah.t0, 0.1 * horizon), horizon)
        summary = summarize(
            spec.curve,
            series.times,
            series.gap,
            window,
            "envelope",
            theoretical_rate=AAH_POWER,
            regime="algebraic",
            algebraic=True,
        )
    else:
        rate, regime = predicted(instance)
        window = spec.window or default_window(horizon)
        if not window[1] <= horizon + 1e-9:
            raise ContractViolation(f"fit window {window} exceeds the horizon {horizon:g}")
        summary = summarize(
            spec.curve,
            series.times,
            series.err_sq_full,
            window,
            spec.fit_mode,
            spec.poly_power,
            theoretical_rate=rate,
            regime=regime,
        )

    path = None
    if spec.out_dir is not None:
        out = Path(spec.out_dir)
        if spec.format == "csv":
            path = write_curve_csv(out / f"{spec.curve}.csv", series)
        else:
            path = write_curve_json(out / f"{spec.curve}.json", series, summary)
        logger.info(f"✅ Wrote {path}")

    return CurveResult(
        spec=spec,
        instance=instance,
        anchor=anchor,
        trajectory=traj,
        series=series,
        summary=summary,
        path=path,
    )
