"""
Figure replication drivers.

fig1: AH and AAH on example1 (gap, velocity and primal error decay)
fig2: AH on example2(alpha) for alpha in {1, 2, 3} (damping trichotomy)

Each curve is written to its own CSV; summary.json lists fitted against
predicted rates. Curves run in a thread pool and share no output state.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Tuple, Union

from ..diagnostics import FitMode
from ..flows import AahParams
from ..integrate import IntegratorConfig
from .runner import AAH_POWER, CurveResult, CurveSummary, ExperimentSpec, run_experiment, summarize

logger = logging.getLogger(__name__)

Figure = Literal["fig1", "fig2"]

FIG1_HORIZON = 50.0
FIG1_WINDOW = (20.0, 40.0)
FIG1_AAH_WINDOW = (10.0, 50.0)
FIG1_AAH = AahParams(nu=3.0, theta=0.5, mu=0.5, t0=1.0)

FIG2_HORIZON = 30.0
FIG2_STEP = 5e-3
FIG2_ALPHAS = (1.0, 2.0, 3.0)

# Fit mode and window per damping regime (under, critical, over)
FIG2_FITS: Dict[float, Tuple[FitMode, Tuple[float, float]]] = {
    1.0: ("envelope", (5.0, 27.0)),
    2.0: ("poly-corrected", (10.0, 18.0)),
    3.0: ("raw", (10.0, 27.0)),
}


@dataclass(frozen=True)
class CurveJob:
    """A spec plus the extra series summaries to derive from its result"""
    spec: ExperimentSpec
    extra: Callable[[CurveResult], List[CurveSummary]]


def _no_extra(result: CurveResult) -> List[CurveSummary]:
    return []


def _fig1_ah_rows(result: CurveResult) -> List[CurveSummary]:
    s = result.series
    rows = []
    for name in ("gap", "vel_sq", "err_sq_primal"):
        rows.append(
            summarize(
                f"{result.spec.curve}-{name}",
                s.times,
                getattr(s, name),
                FIG1_WINDOW,
                "envelope",
                theoretical_rate=result.instance.alpha,
                regime="exp-alpha",
            )
        )
    return rows


def _fig1_aah_rows(result: CurveResult) -> List[CurveSummary]:
    s = result.series
    return [
        summarize(
            f"{result.spec.curve}-{name}",
            s.times,
            getattr(s, name),
            FIG1_AAH_WINDOW,
            "envelope",
            theoretical_rate=AAH_POWER,
            regime="algebraic",
            algebraic=True,
        )
        for name in ("vel_sq", "err_sq_primal")
    ]


def figure_jobs(figure: Figure, out_dir: Union[str, Path]) -> List[CurveJob]:
    """The curve specs making up one figure"""
    out = str(out_dir)
    if figure == "fig1":
        dp54 = IntegratorConfig(method="adaptive-dp54", rtol=1e-9, atol=1e-12, horizon=FIG1_HORIZON, sample_interval=0.01)
        return [
            CurveJob(
                spec=ExperimentSpec(
                    curve="fig1-ah",
                    problem="example1",
                    flow="ah",
                    integrator=dp54,
                    window=FIG1_WINDOW,
                    fit_mode="envelope",
                    out_dir=out,
                ),
                extra=_fig1_ah_rows,
            ),
            CurveJob(
                spec=ExperimentSpec(
                    curve="fig1-aah",
                    problem="example1",
                    flow="aah",
                    aah=FIG1_AAH,
                    mu0=[1.0, 1.0],
                    integrator=dp54,
                    window=FIG1_AAH_WINDOW,
                    out_dir=out,
                ),
                extra=_fig1_aah_rows,
            ),
        ]
    if figure == "fig2":
        rk4 = IntegratorConfig(method="fixed-rk4", step=FIG2_STEP, horizon=FIG2_HORIZON, sample_interval=0.01)
        jobs = []
        for alpha in FIG2_ALPHAS:
            mode, window = FIG2_FITS[alpha]
            jobs.append(
                CurveJob(
                    spec=ExperimentSpec(
                        curve=f"fig2-alpha{alpha:g}",
                        problem="example2",
                        alpha=alpha,
                        flow="ah",
                        integrator=rk4,
                        window=window,
                        fit_mode=mode,
                        poly_power=2,
                        out_dir=out,
                    ),
                    extra=_no_extra,
                )
            )
        return jobs
    raise ValueError(f"unknown figure '{figure}', expected fig1 or fig2")


def _run_job(job: CurveJob) -> Tuple[CurveResult, List[CurveSummary]]:
    result = run_experiment(job.spec)
    return result, [result.summary] + job.extra(result)


def replicate(
    figure: Figure,
    out_dir: Union[str, Path],
    max_workers: Optional[int] = None,
) -> Tuple[List[CurveResult], List[CurveSummary]]:
    """
    Run every curve of a figure, write the CSVs and summary.json.

    Returns:
        (curve results in job order, summary rows in job order)
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = figure_jobs(figure, out)
    logger.info(f"🚀 Replicating {figure}: {len(jobs)} curves into {out}")

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        outcomes = list(pool.map(_run_job, jobs))

    results = [result for result, _ in outcomes]
    rows = [row for _, job_rows in outcomes for row in job_rows]
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps([r.model_dump() for r in rows], indent=2), encoding="utf-8")
    logger.info(f"✅ {figure} done, summary at {summary_path}")
    return results, rows
