"""
Tests for the AH / GAH / AAH vector fields and the oscillator residuals.

Run with: python -m pytest saddle_flow/test_flows.py -v
"""

import numpy as np
import pytest
from pydantic import ValidationError

from saddle_flow.errors import ContractViolation, DimensionError, UnsupportedOperationError
from saddle_flow.experiments import example1, example2, structured_lift
from saddle_flow.flows import (
    AahParams,
    StructuredProblem,
    aah_field,
    aah_initial_state,
    ah_field,
    augmented_lagrangian,
    augmented_lagrangian_grads,
    dual_acceleration,
    gah_field,
    oscillator_residual_dual,
    oscillator_residual_primal,
    primal_acceleration,
    structured_lagrangian,
    structured_operator,
)
from saddle_flow.model import PrimalDualState, QuadraticObjective, kkt_solve, saddle_operator


@pytest.fixture
def ex1():
    return example1()


@pytest.fixture
def lift(ex1):
    return structured_lift(ex1.problem)


class TestAhField:
    def test_zero_at_saddle(self, ex1):
        z = PrimalDualState(x=ex1.saddle.xi, lam=ex1.saddle.eta)
        np.testing.assert_allclose(ah_field(ex1.problem, z), 0.0, atol=1e-14)

    def test_is_negated_operator(self, ex1):
        z = PrimalDualState(x=[0.3, -2.0], lam=[1.5, 0.25])
        np.testing.assert_array_equal(ah_field(ex1.problem, z), -saddle_operator(ex1.problem, z))

    def test_dimension_mismatch(self, ex1):
        with pytest.raises(DimensionError):
            ah_field(ex1.problem, PrimalDualState(x=[0.0, 0.0, 0.0], lam=[0.0, 0.0]))


class TestStructuredProblem:
    """Structured (SP) problems and the degenerate lift"""

    def test_lift_shapes(self, lift):
        assert (lift.n, lift.p, lift.m) == (2, 1, 2)
        np.testing.assert_array_equal(lift.B, np.zeros((2, 1)))

    def test_rejects_bad_B(self, ex1):
        with pytest.raises(DimensionError):
            StructuredProblem(
                f_objective=ex1.problem.objective,
                g_objective=QuadraticObjective(Q=np.eye(1), q=[0.0]),
                A=ex1.problem.A,
                B=np.zeros((3, 1)),
                c=ex1.problem.b,
            )

    def test_combined_saddle(self, lift):
        sp = kkt_solve(lift.combined())
        np.testing.assert_allclose(sp.xi, [1.0, 1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(sp.eta, [-0.5, -0.5], atol=1e-12)

    def test_gah_on_lift_decouples(self, ex1, lift):
        x, y, lam = np.array([-1.0, 1.0]), np.array([2.0]), np.array([1.0, 1.0])
        gah = gah_field(lift, PrimalDualState(x=x, y=y, lam=lam))
        ah = ah_field(ex1.problem, PrimalDualState(x=x, lam=lam))
        np.testing.assert_allclose(gah[:2], ah[:2])
        np.testing.assert_allclose(gah[2], -2.0)
        np.testing.assert_allclose(gah[3:], ah[2:])

    def test_structured_operator_sign(self, lift):
        z = PrimalDualState(x=[0.0, 0.0], y=[0.0], lam=[0.0, 0.0])
        np.testing.assert_allclose(structured_operator(lift, z), [0.0, 0.0, 0.0, 1.0, 1.0])

    def test_missing_y_block(self, lift):
        with pytest.raises(DimensionError):
            structured_operator(lift, PrimalDualState(x=[0.0, 0.0], lam=[0.0, 0.0]))


class TestAugmentedLagrangian:
    def test_reduces_to_lagrangian(self, lift):
        x, y, lam = np.array([0.5, 2.0]), np.array([1.0]), np.array([-1.0, 3.0])
        assert augmented_lagrangian(lift, 0.0, x, y, lam) == structured_lagrangian(lift, x, y, lam)

    def test_gradients_match_finite_differences(self, lift):
        rng = np.random.default_rng(11)
        x, y, lam = rng.standard_normal(2), rng.standard_normal(1), rng.standard_normal(2)
        mu, h = 0.7, 1e-6
        gx, gy, gl = augmented_lagrangian_grads(lift, mu, x, y, lam)
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd = (augmented_lagrangian(lift, mu, x + e, y, lam) - augmented_lagrangian(lift, mu, x - e, y, lam)) / (2 * h)
            assert gx[i] == pytest.approx(fd, abs=1e-6)
            fd = (augmented_lagrangian(lift, mu, x, y, lam + e) - augmented_lagrangian(lift, mu, x, y, lam - e)) / (2 * h)
            assert gl[i] == pytest.approx(fd, abs=1e-6)
        e = np.array([h])
        fd = (augmented_lagrangian(lift, mu, x, y + e, lam) - augmented_lagrangian(lift, mu, x, y - e, lam)) / (2 * h)
        assert gy[0] == pytest.approx(fd, abs=1e-6)

    def test_negative_mu(self, lift):
        with pytest.raises(ContractViolation):
            augmented_lagrangian_grads(lift, -0.1, np.zeros(2), np.zeros(1), np.zeros(2))


class TestAahParams:
    def test_defaults(self):
        params = AahParams()
        assert (params.nu, params.theta, params.mu, params.t0) == (3.0, 0.5, 0.5, 1.0)

    def test_theta_out_of_range(self):
        with pytest.raises(ValidationError):
            AahParams(nu=3.0, theta=0.9)

    def test_theta_lower_edge(self):
        assert AahParams(nu=5.0, theta=0.25).theta == 0.25
        with pytest.raises(ValidationError):
            AahParams(nu=5.0, theta=0.2)

    def test_nu_below_three(self):
        with pytest.raises(ValidationError):
            AahParams(nu=2.0)


class TestAahField:
    def test_rest_at_saddle(self, lift):
        sp = kkt_solve(lift.combined())
        state = aah_initial_state(lift, sp.xi[:2], sp.xi[2:], sp.eta)
        np.testing.assert_allclose(aah_field(lift, AahParams(), 2.0, state.vector), 0.0, atol=1e-14)

    def test_before_start_time(self, lift):
        state = aah_initial_state(lift, np.zeros(2), np.zeros(1), np.zeros(2))
        with pytest.raises(ContractViolation):
            aah_field(lift, AahParams(t0=1.0), 0.5, state.vector)

    def test_positions_derivative_is_velocity(self, lift):
        state = aah_initial_state(
            lift, np.array([-1.0, 1.0]), np.zeros(1), np.array([1.0, 1.0]), mu0=np.array([1.0, 1.0])
        )
        ds = aah_field(lift, AahParams(), 1.0, state.vector)
        np.testing.assert_array_equal(ds[:5], state.vector[5:])
        assert state.velocities.lam.tolist() == [1.0, 1.0]
        assert state.velocities.x.tolist() == [0.0, 0.0]

    def test_wrong_length(self, lift):
        with pytest.raises(DimensionError):
            aah_field(lift, AahParams(), 1.0, np.zeros(7))

    def test_velocity_block_by_hand(self):
        # f = x^2/2, g = y^2, x + 2y = 1, at t = 2: damping nu/t = 1.5 and reach theta t = 1
        sp = StructuredProblem(
            f_objective=QuadraticObjective(Q=[[1.0]], q=[0.0]),
            g_objective=QuadraticObjective(Q=[[2.0]], q=[0.0]),
            A=[[1.0]],
            B=[[2.0]],
            c=[1.0],
        )
        params = AahParams(nu=3.0, theta=0.5, mu=0.5, t0=1.0)
        # (x, y, lambda, x', y', lambda')
        s = np.array([1.0, 0.5, 2.0, 0.5, -1.0, 1.0])
        # primal gradients at (1, 0.5, 2 + 1): residual 1, weighted multiplier 3.5 -> (4.5, 8)
        # dual gradient at (1 + 0.5, 0.5 - 1, 2): residual -0.5
        expected = [0.5, -1.0, 1.0, -1.5 * 0.5 - 4.5, -1.5 * -1.0 - 8.0, -1.5 * 1.0 - 0.5]
        np.testing.assert_allclose(aah_field(sp, params, 2.0, s), expected, atol=1e-14)


class TestOscillatorResiduals:
    """Second-order equations along AH solutions with a scalar Hessian"""

    def test_primal_residual_vanishes(self):
        ex2 = example2(1.0)
        p = ex2.problem
        rng = np.random.default_rng(5)
        for _ in range(50):
            x, lam = rng.standard_normal(2), rng.standard_normal(1)
            zdot = ah_field(p, PrimalDualState(x=x, lam=lam))
            xddot = primal_acceleration(p, zdot[:2], zdot[2:])
            assert oscillator_residual_primal(p, x, zdot[:2], xddot, ex2.saddle.xi) <= 1e-12

    def test_dual_residual_vanishes(self):
        ex2 = example2(3.0)
        p = ex2.problem
        rng = np.random.default_rng(6)
        for _ in range(50):
            x, lam = rng.standard_normal(2), rng.standard_normal(1)
            zdot = ah_field(p, PrimalDualState(x=x, lam=lam))
            lamddot = dual_acceleration(p, zdot[:2])
            assert oscillator_residual_dual(p, lam, zdot[2:], lamddot, ex2.saddle.eta) <= 1e-12

    def test_requires_scalar_hessian(self, ex1):
        with pytest.raises(UnsupportedOperationError):
            oscillator_residual_primal(ex1.problem, np.zeros(2), np.zeros(2), np.zeros(2), ex1.saddle.xi)
