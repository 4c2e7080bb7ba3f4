"""
Tests for the invariant suite behind `saddle-flow validate`.

Run with: python -m pytest saddle_flow/test_checks.py -v
"""

from dataclasses import replace

import numpy as np
import pytest

from saddle_flow.checks import (
    CheckResult,
    check_combined_bound,
    check_dual_rate,
    check_monotone,
    check_oscillator,
    check_primal_tail,
    check_projection_limit,
    check_rate,
    first_failure,
    run_checks,
)
from saddle_flow.diagnostics import diagnostics_series
from saddle_flow.experiments import example1, example2, multiplier_line_problem
from saddle_flow.flows import ah_vector_field
from saddle_flow.integrate import IntegratorConfig, integrate

DP54 = IntegratorConfig(method="adaptive-dp54", rtol=1e-9, atol=1e-12, horizon=50.0)


def statuses(results):
    return {r.name: r.status for r in results}


def ah_run(inst, cfg=DP54):
    p = inst.problem
    traj = integrate(ah_vector_field(p), inst.z0, 0.0, cfg, blocks=(p.n, 0, p.m))
    return traj, diagnostics_series(p, traj, inst.saddle)


@pytest.fixture(scope="module")
def critical_run():
    inst = example2(2.0)
    return (inst,) + ah_run(inst)


class TestSuite:
    """Whole suite on the built-in instances"""

    def test_example2_all_pass(self):
        results = run_checks(example2(1.0), IntegratorConfig(horizon=30.0), samples=100)
        assert first_failure(results) is None
        s = statuses(results)
        assert s["oscillator"] == "PASS"
        assert s["linear-oracle"] == "PASS"
        assert s["cesaro-bound"] == "PASS"
        assert s["combined-bound"] == "PASS"
        assert s["dual-rate"] == "PASS"
        assert s["primal-tail"] == "SKIP"

    @pytest.mark.parametrize("alpha", [2.0, 3.0])
    def test_example2_other_regimes_pass(self, alpha):
        results = run_checks(example2(alpha), DP54, samples=100)
        assert first_failure(results) is None
        s = statuses(results)
        assert s["rate-consistency"] == "PASS"
        assert s["dual-rate"] == "PASS"

    def test_example1_skips_oscillator(self):
        results = run_checks(example1(), samples=100)
        assert first_failure(results) is None
        s = statuses(results)
        assert s["oscillator"] == "SKIP"
        assert s["combined-bound"] == "SKIP"
        assert s["primal-tail"] == "PASS"

    def test_multiplier_line_projection(self):
        results = run_checks(multiplier_line_problem(), samples=100)
        assert first_failure(results) is None
        s = statuses(results)
        assert s["projection-limit"] == "PASS"
        assert s["primal-tail"] == "PASS"
        assert s["dual-rate"] == "SKIP"


class TestSingleChecks:
    def test_increasing_series_fails(self):
        result = check_monotone("distance-monotone", np.arange(5.0), 1e-9)
        assert result.failed
        assert "4 violations" in result.detail

    def test_first_failure_order(self):
        results = [
            CheckResult("a", "PASS"),
            CheckResult("b", "SKIP"),
            CheckResult("c", "FAIL", "first"),
            CheckResult("d", "FAIL", "second"),
        ]
        assert first_failure(results).name == "c"

    def test_projection_skipped_when_moving(self):
        inst = example1()
        p = inst.problem
        traj = integrate(ah_vector_field(p), inst.z0, 0.0, IntegratorConfig(horizon=2.0), blocks=(p.n, 0, p.m))
        assert check_projection_limit(inst, traj).status == "SKIP"
        assert check_oscillator(inst, traj).status == "SKIP"

    def test_tail_skipped_on_short_horizon(self):
        _, ds = ah_run(example1(), IntegratorConfig(horizon=10.0))
        assert check_primal_tail(example1(), ds).status == "SKIP"


class TestCriticalDamping:
    """example2(alpha=2): double eigenvalue -1, t^2 exp(-2t) error"""

    def test_rate_uses_polynomial_correction(self, critical_run):
        inst, traj, _ = critical_run
        result = check_rate(inst, traj)
        assert result.status == "PASS"
        assert "poly-corrected" in result.detail

    def test_combined_bound(self, critical_run):
        inst, traj, _ = critical_run
        result = check_combined_bound(inst, traj)
        assert result.status == "PASS"
        # the component of x - xi orthogonal to A' starts at (-1, 1)
        assert "initial 2" in result.detail

    def test_dual_rate(self, critical_run):
        inst, _, ds = critical_run
        result = check_dual_rate(inst, ds)
        assert result.status == "PASS"
        assert "critical" in result.detail


class TestDualEstimates:
    def test_dual_rate_flags_wrong_exponent(self):
        # the under-damped dual error decays like exp(-t); exp(-2t) is too fast
        inst = example2(1.0)
        _, ds = ah_run(inst)
        slow = replace(ds, err_sq_dual=ds.err_sq_dual * np.exp(0.5 * ds.times))
        assert check_dual_rate(inst, slow).failed

    def test_combined_bound_skipped_without_scalar_hessian(self):
        inst = example1()
        traj, _ = ah_run(inst, IntegratorConfig(horizon=5.0))
        assert check_combined_bound(inst, traj).status == "SKIP"


@pytest.mark.parametrize("alpha", [2.0, 3.0])
def test_oscillator_along_example2(alpha):
    inst = example2(alpha)
    p = inst.problem
    traj = integrate(ah_vector_field(p), inst.z0, 0.0, IntegratorConfig(horizon=10.0), blocks=(p.n, 0, p.m))
    assert check_oscillator(inst, traj).status == "PASS"
