"""
Tests for objectives, the Lagrangian, the saddle operator and the KKT oracle.

Run with: python -m pytest saddle_flow/model/test_model.py -v
"""

import math

import numpy as np
import pytest

from saddle_flow.errors import (
    ContractViolation,
    DimensionError,
    NoSaddlePointError,
    NotConvexError,
    UnsupportedOperationError,
)
from saddle_flow.model import (
    LinearConstraint,
    PrimalDualState,
    ProblemData,
    QuadraticObjective,
    SaddleProblem,
    SmoothObjective,
    bregman_distance,
    condition_c_residual,
    convexity_constants,
    dump_problem,
    kkt_solve,
    lagrangian,
    lagrangian_grad,
    load_problem,
    multiplier_projection,
    operator_constants,
    saddle_operator,
    strong_monotonicity_slack,
)


@pytest.fixture
def example1():
    return SaddleProblem(
        objective=QuadraticObjective(Q=[[1.0, -0.5], [-0.5, 1.0]], q=[0.0, 0.0]),
        constraint=LinearConstraint(A=np.eye(2), b=[1.0, 1.0]),
    )


@pytest.fixture
def multiplier_line():
    return SaddleProblem(
        objective=QuadraticObjective(Q=[[1.0]], q=[0.0]),
        constraint=LinearConstraint(A=[[1.0], [1.0]], b=[1.0, 1.0]),
    )


def softplus_objective(grad_scale: float = 1.0) -> SmoothObjective:
    """sum log(1 + e^x) with its gradient (optionally scaled to break it)"""
    return SmoothObjective(
        dim=3,
        fun=lambda x: float(np.sum(np.logaddexp(0.0, x))),
        grad=lambda x: grad_scale / (1.0 + np.exp(-x)),
        hessian_action=lambda x, v: (np.exp(-x) / (1.0 + np.exp(-x)) ** 2) * v,
    )


class TestQuadraticObjective:
    """Construction, constants and closed-form derivatives"""

    def test_example1_constants(self, example1):
        alpha, gamma = convexity_constants(example1.objective)
        assert alpha == pytest.approx(0.5, abs=1e-14)
        assert gamma == pytest.approx(1.5, abs=1e-14)

    def test_rejects_nonsymmetric(self):
        with pytest.raises(ContractViolation):
            QuadraticObjective(Q=[[1.0, 1.0], [0.0, 1.0]], q=[0.0, 0.0])

    def test_rejects_indefinite(self):
        with pytest.raises(NotConvexError):
            QuadraticObjective(Q=[[1.0, 0.0], [0.0, -1.0]], q=[0.0, 0.0])

    def test_accepts_singular_psd(self):
        o = QuadraticObjective(Q=[[1.0, 0.0], [0.0, 0.0]], q=[0.0, 0.0])
        assert o.alpha == 0.0
        assert o.gamma == 1.0

    def test_rejects_mismatched_q(self):
        with pytest.raises(DimensionError):
            QuadraticObjective(Q=np.eye(2), q=[1.0, 2.0, 3.0])

    def test_value_and_gradient(self, example1):
        o = example1.objective
        assert o.value([-1.0, 1.0]) == pytest.approx(1.5)
        np.testing.assert_allclose(o.gradient([1.0, 1.0]), [0.5, 0.5])

    def test_scalar_hessian(self):
        assert QuadraticObjective(Q=3.0 * np.eye(2), q=[0.0, 0.0]).scalar_hessian() == 3.0
        assert QuadraticObjective(Q=[[1.0, -0.5], [-0.5, 1.0]], q=[0.0, 0.0]).scalar_hessian() is None

    def test_arrays_are_read_only(self, example1):
        with pytest.raises(ValueError):
            example1.objective.Q[0, 0] = 5.0


class TestSmoothObjective:
    """Callable objectives and the gradient check"""

    def test_gradient_check_passes(self):
        assert softplus_objective().check_gradient(lo=-2.0, hi=2.0, seed=1) <= 1e-5

    def test_gradient_check_detects_wrong_gradient(self):
        assert softplus_objective(grad_scale=2.0).check_gradient(seed=1) > 1e-2

    def test_missing_hessian(self):
        o = SmoothObjective(dim=1, fun=lambda x: float(x @ x), grad=lambda x: 2.0 * x)
        with pytest.raises(UnsupportedOperationError):
            o.hessian_vector(np.zeros(1), np.ones(1))
        with pytest.raises(UnsupportedOperationError):
            condition_c_residual(o, np.zeros(1), np.ones(1))
        assert o.scalar_hessian() is None


class TestBregmanAndConditionC:
    def test_bregman_quadratic(self, example1):
        o = example1.objective
        d = np.array([1.0, 2.0])
        assert bregman_distance(o, d, np.zeros(2)) == pytest.approx(0.5 * d @ o.Q @ d)

    def test_bregman_matches_definition(self):
        o = softplus_objective()
        x, y = np.array([0.1, -0.3, 0.7]), np.array([1.0, 0.5, -0.2])
        expected = o.value(y) - o.value(x) - float(o.gradient(x) @ (y - x))
        assert bregman_distance(o, y, x) == pytest.approx(expected)
        assert bregman_distance(o, y, x) >= 0.0

    def test_condition_c_vanishes_for_quadratics(self, example1):
        rng = np.random.default_rng(3)
        for _ in range(20):
            x, y = rng.standard_normal(2), rng.standard_normal(2)
            assert abs(condition_c_residual(example1.objective, x, y)) <= 1e-12

    def test_condition_c_violated_by_quartic(self):
        quartic = SmoothObjective(
            dim=1,
            fun=lambda x: float(x[0] ** 4),
            grad=lambda x: 4.0 * x ** 3,
            hessian_action=lambda x, v: 12.0 * x ** 2 * v,
        )
        # 2 * (0 - 1 + 4) - 12
        assert condition_c_residual(quartic, [1.0], [0.0]) == pytest.approx(-6.0)
        assert condition_c_residual(quartic, [1.0], [1.0]) == 0.0


class TestLagrangian:
    """L, its gradient and the saddle operator T"""

    def test_gradient_vanishes_at_saddle(self, example1):
        gx, gl = lagrangian_grad(example1, PrimalDualState(x=[1.0, 1.0], lam=[-0.5, -0.5]))
        np.testing.assert_allclose(gx, 0.0, atol=1e-15)
        np.testing.assert_allclose(gl, 0.0, atol=1e-15)

    def test_initial_gap(self, example1):
        eta, xi = np.array([-0.5, -0.5]), np.array([1.0, 1.0])
        gap = lagrangian(example1, PrimalDualState(x=[-1.0, 1.0], lam=eta)) - lagrangian(
            example1, PrimalDualState(x=xi, lam=[1.0, 1.0])
        )
        assert gap == pytest.approx(2.0)

    def test_value_away_from_feasibility(self, example1):
        # f(0) = 0 and <(1, 1), A0 - b> = -2
        assert lagrangian(example1, PrimalDualState(x=[0.0, 0.0], lam=[1.0, 1.0])) == pytest.approx(-2.0)

    def test_operator_is_monotone(self, example1):
        rng = np.random.default_rng(11)
        for _ in range(100):
            z = PrimalDualState(x=rng.standard_normal(2), lam=rng.standard_normal(2))
            w = PrimalDualState(x=rng.standard_normal(2), lam=rng.standard_normal(2))
            dz = z.as_vector() - w.as_vector()
            inner = float((saddle_operator(example1, z) - saddle_operator(example1, w)) @ dz)
            assert inner >= -1e-12 * float(dz @ dz)

    def test_operator_sign_convention(self, example1):
        z = PrimalDualState(x=[0.0, 0.0], lam=[0.0, 0.0])
        # T = (grad f + A'lambda, b - Ax)
        np.testing.assert_allclose(saddle_operator(example1, z), [0.0, 0.0, 1.0, 1.0])

    def test_state_dimension_checked(self, example1):
        with pytest.raises(DimensionError):
            lagrangian(example1, PrimalDualState(x=[1.0], lam=[0.0, 0.0]))

    def test_non_finite_state(self):
        with pytest.raises(ContractViolation):
            PrimalDualState(x=[float("nan")], lam=[0.0])

    def test_state_rejects_matrix(self):
        with pytest.raises(DimensionError, match="lambda"):
            PrimalDualState(x=[1.0], lam=np.ones((2, 2)))
        # column vectors are flattened
        assert PrimalDualState(x=[[1.0], [2.0]], lam=[0.0]).x.tolist() == [1.0, 2.0]

    def test_strong_monotonicity_slack(self, example1):
        rng = np.random.default_rng(7)
        for _ in range(100):
            z = PrimalDualState(x=rng.standard_normal(2), lam=rng.standard_normal(2))
            w = PrimalDualState(x=rng.standard_normal(2), lam=rng.standard_normal(2))
            assert strong_monotonicity_slack(example1, z, w, 0.5) >= -1e-12


class TestOperatorConstants:
    def test_identity(self, example1):
        c = operator_constants(example1.constraint)
        assert c.beta_primal == pytest.approx(1.0)
        assert c.beta_dual == pytest.approx(1.0)
        assert c.a_norm_sq == pytest.approx(1.0)

    def test_scalar_constraint(self):
        row = math.sqrt(2.0) / 2.0
        c = operator_constants(LinearConstraint(A=[[row, row]], b=[1.0]))
        assert c.beta_dual == pytest.approx(1.0)
        assert c.beta_primal == 0.0

    def test_multiplier_line(self, multiplier_line):
        c = operator_constants(multiplier_line.constraint)
        assert c.beta_primal == pytest.approx(2.0)
        assert c.beta_dual == 0.0


class TestKktSolve:
    """KKT oracle and the multiplier set"""

    def test_example1(self, example1):
        sp = kkt_solve(example1)
        np.testing.assert_allclose(sp.xi, [1.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(sp.eta, [-0.5, -0.5], atol=1e-12)
        assert sp.stationarity_residual <= 1e-12
        assert sp.feasibility_residual <= 1e-12
        assert sp.certified
        assert not sp.multiplier_min_norm
        assert sp.multiplier_basis.shape == (2, 0)

    def test_infeasible(self):
        p = SaddleProblem(
            objective=QuadraticObjective(Q=np.eye(2), q=[0.0, 0.0]),
            constraint=LinearConstraint(A=[[1.0, 0.0], [1.0, 0.0]], b=[1.0, 2.0]),
        )
        with pytest.raises(NoSaddlePointError) as exc:
            kkt_solve(p)
        assert exc.value.reason == "infeasible"
        assert "no saddle point" in str(exc.value)

    def test_unbounded(self):
        p = SaddleProblem(
            objective=QuadraticObjective(Q=np.zeros((2, 2)), q=[0.0, 1.0]),
            constraint=LinearConstraint(A=[[1.0, 0.0]], b=[1.0]),
        )
        with pytest.raises(NoSaddlePointError) as exc:
            kkt_solve(p)
        assert exc.value.reason == "unbounded"

    def test_non_unique_multipliers(self, multiplier_line):
        sp = kkt_solve(multiplier_line)
        np.testing.assert_allclose(sp.xi, [1.0], atol=1e-12)
        np.testing.assert_allclose(sp.eta, [-0.5, -0.5], atol=1e-12)
        assert sp.multiplier_min_norm
        assert sp.multiplier_basis.shape == (2, 1)
        np.testing.assert_allclose(np.abs(sp.multiplier_basis[:, 0]), [math.sqrt(0.5)] * 2, atol=1e-12)

    def test_multiplier_projection(self, multiplier_line):
        xi = np.array([1.0])
        np.testing.assert_allclose(multiplier_projection(multiplier_line, xi, [1.0, 1.0]), [-0.5, -0.5], atol=1e-12)
        np.testing.assert_allclose(multiplier_projection(multiplier_line, xi, [4.0, -2.0]), [2.5, -3.5], atol=1e-12)

    def test_identity_constraint_saddle(self):
        b = np.array([3.0, -2.0])
        p = SaddleProblem(
            objective=QuadraticObjective(Q=np.eye(2), q=[0.0, 0.0]),
            constraint=LinearConstraint(A=np.eye(2), b=b),
        )
        sp = kkt_solve(p)
        np.testing.assert_allclose(sp.xi, b, atol=1e-12)
        np.testing.assert_allclose(sp.eta, -b, atol=1e-12)

    def test_projection_idempotent_and_non_expansive(self, multiplier_line):
        xi = np.array([1.0])
        rng = np.random.default_rng(5)
        for _ in range(100):
            a, b = 3.0 * rng.standard_normal(2), 3.0 * rng.standard_normal(2)
            pa = multiplier_projection(multiplier_line, xi, a)
            pb = multiplier_projection(multiplier_line, xi, b)
            np.testing.assert_allclose(multiplier_projection(multiplier_line, xi, pa), pa, atol=1e-12)
            assert pa.sum() == pytest.approx(-1.0, abs=1e-12)
            assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-12

    def test_empty_multiplier_set(self):
        p = SaddleProblem(
            objective=QuadraticObjective(Q=np.eye(2), q=[0.0, 0.0]),
            constraint=LinearConstraint(A=[[1.0, 0.0]], b=[1.0]),
        )
        with pytest.raises(NoSaddlePointError) as exc:
            multiplier_projection(p, np.array([1.0, 1.0]), [0.0])
        assert exc.value.reason == "empty-multiplier-set"

    def test_smooth_objective_unsupported(self):
        p = SaddleProblem(objective=softplus_objective(), constraint=LinearConstraint(A=[[1.0, 1.0, 1.0]], b=[0.0]))
        with pytest.raises(UnsupportedOperationError):
            kkt_solve(p)


class TestProblemData:
    def test_file_round_trip(self, example1, tmp_path):
        path = tmp_path / "example1.json"
        dump_problem(example1, path)
        loaded = load_problem(path)
        np.testing.assert_array_equal(loaded.objective.Q, example1.objective.Q)
        np.testing.assert_array_equal(loaded.A, example1.A)
        np.testing.assert_array_equal(loaded.b, example1.b)

    def test_schema_example_builds(self):
        example = ProblemData.model_config["json_schema_extra"]["example"]
        p = ProblemData.model_validate(example).to_problem()
        assert (p.n, p.m) == (2, 2)
