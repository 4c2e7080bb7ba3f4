"""
Command-line front end.

Subcommands:
- run:        integrate one flow on one problem and write its curve file
- replicate:  regenerate the data behind fig1 or fig2
- rates:      print the predicted rates for (alpha, beta, gamma)
- validate:   run the invariant suite on a problem, PASS/FAIL per check

Exit codes: 0 success, 1 numerical or validation failure, 2 usage error.
"""

import argparse
import json
import logging
import sys
from typing import List, Literal, Optional, Sequence

from pydantic import BaseModel, Field, ValidationError

from .cfg import get_settings
from .checks import first_failure, run_checks
from .diagnostics import theoretical_rates
from .errors import SaddleFlowError
from .experiments import PROBLEMS, ExperimentSpec, replicate, resolve_instance, run_experiment
from .flows import AahParams
from .integrate import IntegratorConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

AAH_FLAGS = ("--nu", "--theta", "--mu", "--t0", "--v0", "--mu0")

# pydantic field name -> flag, for naming the offending flag on errors
FIELD_FLAGS = {
    "nu": "--nu",
    "theta": "--theta",
    "mu": "--mu",
    "t0": "--t0",
    "method": "--method",
    "sample_interval": "--sample-interval",
    "step": "--step",
    "rtol": "--rtol",
    "atol": "--atol",
    "horizon": "--horizon",
    "alpha": "--alpha",
    "seed": "--seed",
    "problem": "--problem",
    "window": "--window",
}


class CliConfig(BaseModel):
    """Validated command line"""
    command: Literal["run", "replicate", "rates", "validate"]
    experiment: Optional[ExperimentSpec] = Field(default=None, description="run / validate: problem, flow and integrator")
    figure: Optional[Literal["fig1", "fig2"]] = Field(default=None, description="replicate: which figure")
    out_dir: str = Field(default="./out", description="Output directory")
    format: Literal["csv", "json"] = "csv"
    jobs: Optional[int] = Field(default=None, ge=1, description="Worker threads for replicate")
    alpha: Optional[float] = Field(default=None, gt=0.0, description="rates: strong convexity constant")
    beta: Optional[float] = Field(default=None, gt=0.0, description="rates: lower bound constant of A*")
    gamma: Optional[float] = Field(default=None, gt=0.0, description="rates: Hessian bound")
    scalar_hessian: bool = Field(default=False, description="rates: Hessian is alpha * identity")
    verbose: bool = False

    model_config = {
        "json_schema_extra": {
            "example": {
                "command": "rates",
                "alpha": 0.5,
                "beta": 1.0,
                "gamma": 1.5,
                "scalar_hessian": False,
            }
        }
    }


# ============================================================================
# Parsing
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    fmt = argparse.ArgumentDefaultsHelpFormatter

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    problem = argparse.ArgumentParser(add_help=False)
    problem.add_argument("--problem", choices=sorted(PROBLEMS), default="example1", help="Built-in problem")
    problem.add_argument("--problem-file", default=None, help="JSON problem file (Q, q, c0, A, b), overrides --problem")
    problem.add_argument("--alpha", type=float, default=1.0, help="alpha for example2")
    problem.add_argument("--seed", type=int, default=0, help="Seed for random-qp")
    problem.add_argument("--horizon", type=float, default=50.0, help="Final time T")

    parser = argparse.ArgumentParser(
        prog="saddle-flow",
        description="Arrow-Hurwicz primal-dual flow simulator",
        formatter_class=fmt,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common, problem], formatter_class=fmt, help="Integrate one flow")
    p_run.add_argument("--flow", choices=["ah", "gah", "aah"], default="ah", help="Dynamical system")
    p_run.add_argument("--method", choices=["fixed-rk4", "adaptive-dp54"], default="adaptive-dp54", help="Integrator")
    p_run.add_argument("--step", type=float, default=settings.fixed_step, help="Step for fixed-rk4")
    p_run.add_argument("--rtol", type=float, default=settings.rtol, help="Relative tolerance for adaptive-dp54")
    p_run.add_argument("--atol", type=float, default=settings.atol, help="Absolute tolerance for adaptive-dp54")
    p_run.add_argument("--sample-interval", type=float, default=settings.sample_interval, help="Spacing of stored samples")
    p_run.add_argument("--x0", type=float, nargs="+", default=None, help="Initial x (reference data if omitted)")
    p_run.add_argument("--lambda0", type=float, nargs="+", default=None, help="Initial multiplier (reference data if omitted)")
    p_run.add_argument("--nu", type=float, default=3.0, help="AAH damping exponent (flow=aah only)")
    p_run.add_argument("--theta", type=float, default=0.5, help="AAH extrapolation coefficient (flow=aah only)")
    p_run.add_argument("--mu", type=float, default=0.5, help="AAH augmentation parameter (flow=aah only)")
    p_run.add_argument("--t0", type=float, default=1.0, help="AAH start time (flow=aah only)")
    p_run.add_argument("--v0", type=float, nargs="+", default=None, help="AAH initial x velocity (flow=aah only)")
    p_run.add_argument("--mu0", type=float, nargs="+", default=None, help="AAH initial multiplier velocity (flow=aah only)")
    p_run.add_argument("--window", type=float, nargs=2, default=None, metavar=("T_LO", "T_HI"), help="Rate fit window, [T/2, 0.9T] if omitted")
    p_run.add_argument("--fit-mode", choices=["raw", "envelope", "poly-corrected"], default="raw", help="Rate fit mode")
    p_run.add_argument("--curve", default="run", help="Curve id and output file stem")
    p_run.add_argument("--out", default=settings.out, help="Output directory (SADDLE_FLOW_OUT)")
    p_run.add_argument("--format", choices=["csv", "json"], default="csv", help="Curve file format")

    p_rep = sub.add_parser("replicate", parents=[common], formatter_class=fmt, help="Regenerate figure data")
    p_rep.add_argument("figure", choices=["fig1", "fig2"], help="Figure to replicate")
    p_rep.add_argument("--out", default=settings.out, help="Output directory (SADDLE_FLOW_OUT)")
    p_rep.add_argument("--jobs", type=int, default=None, help="Worker threads (one per curve if omitted)")

    p_rates = sub.add_parser("rates", parents=[common], formatter_class=fmt, help="Print predicted rates")
    p_rates.add_argument("--alpha", type=float, default=0.5, help="Strong convexity constant")
    p_rates.add_argument("--beta", type=float, default=1.0, help="Lower bound constant of A*")
    p_rates.add_argument("--gamma", type=float, default=1.5, help="Hessian bound")
    p_rates.add_argument("--scalar-hessian", action="store_true", help="Hessian is alpha * identity (damping regimes)")

    sub.add_parser("validate", parents=[common, problem], formatter_class=fmt, help="Run the invariant suite")
    return parser


def _given(argv: Sequence[str]) -> set:
    return {a.split("=", 1)[0] for a in argv if a.startswith("--")}


def _flag_for(error: ValidationError, fallback: str) -> str:
    for item in error.errors():
        for loc in reversed(item.get("loc", ())):
            if loc in FIELD_FLAGS:
                return FIELD_FLAGS[loc]
        message = item.get("msg", "")
        for field, flag in FIELD_FLAGS.items():
            if f"{field}=" in message:
                return flag
    return fallback


def _messages(error: ValidationError) -> str:
    return "; ".join(item.get("msg", "") for item in error.errors())


def parse_and_validate(argv: Optional[Sequence[str]] = None) -> CliConfig:
    """
    Parse argv into a CliConfig.

    Invalid or inconsistent flags exit with code 2 and a message on stderr
    naming the flag (argparse's parser.error).
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "replicate":
        if args.jobs is not None and args.jobs < 1:
            parser.error("argument --jobs: must be >= 1")
        return CliConfig(command="replicate", figure=args.figure, out_dir=args.out, jobs=args.jobs, verbose=args.verbose)

    if args.command == "rates":
        for flag in ("alpha", "beta", "gamma"):
            if getattr(args, flag) <= 0:
                parser.error(f"argument --{flag}: must be positive")
        return CliConfig(
            command="rates",
            alpha=args.alpha,
            beta=args.beta,
            gamma=args.gamma,
            scalar_hessian=args.scalar_hessian,
            verbose=args.verbose,
        )

    if args.command == "validate":
        try:
            spec = ExperimentSpec(
                problem=args.problem,
                problem_file=args.problem_file,
                alpha=args.alpha,
                seed=args.seed,
                integrator=IntegratorConfig(method="adaptive-dp54", rtol=1e-9, atol=1e-12, horizon=args.horizon),
            )
        except ValidationError as e:
            parser.error(f"argument {_flag_for(e, '--horizon')}: {_messages(e)}")
        return CliConfig(command="validate", experiment=spec, verbose=args.verbose)

    if args.flow != "aah":
        stray = sorted(_given(argv) & set(AAH_FLAGS))
        if stray:
            parser.error(f"argument {stray[0]}: only valid with --flow aah (got --flow {args.flow})")

    try:
        aah = AahParams(nu=args.nu, theta=args.theta, mu=args.mu, t0=args.t0)
        integrator = IntegratorConfig(
            method=args.method,
            step=args.step,
            rtol=args.rtol,
            atol=args.atol,
            horizon=args.horizon,
            sample_interval=args.sample_interval,
        )
        spec = ExperimentSpec(
            curve=args.curve,
            problem=args.problem,
            problem_file=args.problem_file,
            alpha=args.alpha,
            seed=args.seed,
            flow=args.flow,
            aah=aah,
            x0=args.x0,
            lambda0=args.lambda0,
            v0=args.v0,
            mu0=args.mu0,
            integrator=integrator,
            window=tuple(args.window) if args.window else None,
            fit_mode=args.fit_mode,
            out_dir=args.out,
            format=args.format,
        )
    except ValidationError as e:
        fallback = "--theta" if e.title == "AahParams" else "--horizon"
        parser.error(f"argument {_flag_for(e, fallback)}: {_messages(e)}")
    return CliConfig(command="run", experiment=spec, out_dir=args.out, format=args.format, verbose=args.verbose)


# ============================================================================
# Execution
# ============================================================================

def _execute_run(cfg: CliConfig) -> int:
    result = run_experiment(cfg.experiment)
    print(json.dumps(result.summary.model_dump(), indent=2))
    if result.path is not None:
        print(f"wrote {result.path}", file=sys.stderr)
    return EXIT_OK


def _execute_replicate(cfg: CliConfig) -> int:
    _, rows = replicate(cfg.figure, cfg.out_dir, max_workers=cfg.jobs)
    print(json.dumps([r.model_dump() for r in rows], indent=2))
    return EXIT_OK


def _execute_rates(cfg: CliConfig) -> int:
    rates = theoretical_rates(cfg.alpha, cfg.beta, cfg.gamma, scalar_hessian=cfg.scalar_hessian)
    print(f"rho = {rates.rho:.6g}")
    print(f"case ({rates.case}), discriminant = {rates.case_discriminant:.6g}")
    if rates.regime is not None:
        print(f"regime = {rates.regime}")
    if rates.delta is not None:
        print(f"delta = {rates.delta:.6g}")
    suffix = f" with t^{rates.poly_power} factor" if rates.poly_power else ""
    print(f"predicted err_sq exponent = {rates.predicted_decay_exponent:.6g}{suffix}")
    return EXIT_OK


def _execute_validate(cfg: CliConfig) -> int:
    instance = resolve_instance(cfg.experiment)
    results = run_checks(instance, cfg.experiment.integrator)
    for r in results:
        print(f"{r.status} {r.name}: {r.detail}")
    failure = first_failure(results)
    if failure is not None:
        print(f"❌ validation failed at check '{failure.name}': {failure.detail}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def execute(cfg: CliConfig) -> int:
    """Run a validated config; library failures map to exit code 1"""
    handlers = {
        "run": _execute_run,
        "replicate": _execute_replicate,
        "rates": _execute_rates,
        "validate": _execute_validate,
    }
    try:
        return handlers[cfg.command](cfg)
    except SaddleFlowError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as e:
        print(f"❌ I/O failure: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except (ValidationError, ValueError) as e:
        print(f"❌ invalid input: {e}", file=sys.stderr)
        return EXIT_FAILURE


def configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, get_settings().log_level.upper(), logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    cfg = parse_and_validate(argv)
    configure_logging(cfg.verbose)
    logger.debug(f"Parsed {cfg.command} config")
    return execute(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
