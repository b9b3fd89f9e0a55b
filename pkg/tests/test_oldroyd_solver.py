"""
Test the pseudo-spectral Oldroyd-B solver
"""

import math
from dataclasses import replace
from unittest.mock import patch

import numpy as np
import pytest
from pydantic import ValidationError

from oldroyd_lab.services.oldroyd_solver import (
    BLOW_UP_FACTOR,
    BLOW_UP_FLOOR,
    DIAGNOSTIC_COLUMNS,
    Diagnostics,
    Params,
    RunSettings,
    blow_up_scale,
    divergence_residual,
    initial_state,
    nonlinear_terms,
    rhs_tau,
    rhs_u,
    run,
    skew_residual,
    step,
    step_count,
)
from oldroyd_lab.utils.checkpoint import read_checkpoint
from oldroyd_lab.utils.errors import BlowUpError, StepSizeError
from oldroyd_lab.utils.initial_data import random_band
from oldroyd_lab.utils.spectral import TensorField, VectorField, lp_norm


@pytest.mark.unit
class TestParams:
    """Test parameter validation"""

    def test_defaults(self):
        params = Params()
        assert (params.nu, params.a, params.mu, params.b) == (1.0, 0.0, 0.0, 0.0)
        assert params.friedrichs_n is None

    @pytest.mark.parametrize("field, value", [("nu", 0.0), ("a", -1.0), ("mu", -0.5), ("b", 1.5), ("friedrichs_n", 0)])
    def test_invalid(self, field, value):
        with pytest.raises(ValidationError):
            Params(**{field: value})

    def test_frozen(self):
        with pytest.raises(ValidationError):
            Params().nu = 2.0


@pytest.mark.unit
class TestInitialState:
    """Test the admissibility projection"""

    def test_mean_velocity_removed(self, grid2):
        u = VectorField(grid2, np.ones((2,) + grid2.shape))
        state = initial_state(u, TensorField.zeros(grid2), Params())
        assert state.u.max_abs() < 1e-14

    def test_stress_symmetrized(self, grid2, rng):
        tau = TensorField(grid2, rng.standard_normal((2, 2) + grid2.shape))
        state = initial_state(VectorField.zeros(grid2), tau, Params())
        assert state.tau.asymmetry() < 1e-14

    def test_friedrichs_variant(self, grid2, sample_data):
        state = initial_state(sample_data.u, sample_data.tau, Params(friedrichs_n=1))
        xi = grid2.xi_norm
        outside = (xi < 1.0) | (xi > 1.0)
        assert np.max(np.abs(state.u.hat[:, outside])) < 1e-12


@pytest.mark.unit
class TestRightHandSides:
    """Test the spectral right-hand sides"""

    def test_rest_state(self, grid2):
        u_rhs, tau_rhs = nonlinear_terms(grid2, np.zeros((2,) + grid2.shape), np.zeros((2, 2) + grid2.shape), Params(mu=1.0))
        assert np.max(np.abs(u_rhs)) == 0.0
        assert np.max(np.abs(tau_rhs)) == 0.0

    def test_pure_damping_rate(self, grid2):
        tau = TensorField.identity(grid2, 0.3)
        state = initial_state(VectorField.zeros(grid2), tau, Params(a=2.0))
        np.testing.assert_allclose(rhs_tau(state).values, -2.0 * state.tau.values, atol=1e-14)

    def test_velocity_rhs_divergence_free(self, sample_data, damped_params):
        state = initial_state(sample_data.u, sample_data.tau, damped_params)
        assert rhs_u(state).is_divergence_free()

    def test_coupling_term(self, grid2):
        """u = (sin y, 0) at rest stress: the stress rate is mu D"""
        y = grid2.coordinates[1]
        u = VectorField(grid2, np.stack([np.sin(y), np.zeros(grid2.shape)]))
        state = initial_state(u, TensorField.zeros(grid2), Params(mu=0.7))
        rate = rhs_tau(state)
        np.testing.assert_allclose(rate.values[0, 1], 0.7 * 0.5 * np.cos(y), atol=1e-12)
        np.testing.assert_allclose(rate.values[0, 0], 0.0, atol=1e-12)


@pytest.mark.unit
class TestStep:
    """Test single time steps"""

    @pytest.mark.parametrize("dt", [0.0, -1e-3, math.inf])
    def test_invalid_step(self, sample_data, damped_params, dt):
        state = initial_state(sample_data.u, sample_data.tau, damped_params)
        with pytest.raises(StepSizeError):
            step(state, dt)

    def test_cfl_violation(self, sample_data, damped_params):
        state = initial_state(sample_data.u, sample_data.tau, damped_params)
        with pytest.raises(StepSizeError):
            step(state, 1.0)

    def test_invariants_preserved(self, sample_data):
        state = initial_state(sample_data.u, sample_data.tau, Params(nu=1.0, a=1.0, mu=0.5, b=0.3))
        for _ in range(5):
            state = step(state, 1e-3)
        assert state.t == pytest.approx(5e-3)
        assert state.tau.asymmetry() < 1e-12
        assert divergence_residual(state) < 1e-10

    def test_rotational_term_is_energy_neutral(self, sample_data):
        state = initial_state(sample_data.u, sample_data.tau, Params(a=1.0))
        assert skew_residual(state) < 1e-10


@pytest.mark.integration
class TestRun:
    """Test the time-integration driver"""

    @pytest.mark.parametrize("T, dt, expected", [(0.0, 0.1, 0), (1.0, 0.3, 4), (1.0, 0.25, 4), (0.02, 1e-3, 20)])
    def test_step_count(self, T, dt, expected):
        assert step_count(T, dt) == expected

    def test_pure_damping(self, grid2):
        """u = 0 and constant tau: tau(t) = e^{-at} tau0"""
        tau0 = TensorField.identity(grid2, 0.3)
        initial = initial_state(VectorField.zeros(grid2), tau0, Params(a=2.0))
        result = run(initial, RunSettings(dt=0.01, T=0.5, sample_every=10))
        expected = math.exp(-2.0 * 0.5) * tau0.values
        np.testing.assert_allclose(result.final_state.tau.values, expected, rtol=1e-12, atol=1e-14)
        assert result.final_state.u.max_abs() == 0.0

    def test_diagnostics(self, sample_data, damped_params, partition2):
        initial = initial_state(sample_data.u, sample_data.tau, damped_params)
        result = run(initial, RunSettings(dt=1e-3, T=0.02, sample_every=5), partition2)
        frame = result.diagnostics.to_frame()
        assert list(frame.columns) == DIAGNOSTIC_COLUMNS
        assert len(frame) == 5
        np.testing.assert_allclose(frame["time"], [0.0, 0.005, 0.01, 0.015, 0.02])
        assert frame["nu_grad_u_l2_sq_int"].iloc[0] == 0.0
        assert np.all(np.diff(frame["nu_grad_u_l2_sq_int"]) > 0)
        assert result.steps == 20
        assert result.invariants.steps == 20
        assert result.invariants.max_asymmetry < 1e-12
        assert result.invariants.max_divergence < 1e-10
        assert result.invariants.max_skew_residual < 1e-10

    def test_zero_horizon(self, sample_data, damped_params):
        initial = initial_state(sample_data.u, sample_data.tau, damped_params)
        result = run(initial, RunSettings(dt=1e-3, T=0.0))
        assert result.steps == 0
        assert len(result.diagnostics) == 1

    def test_checkpoint_written(self, tmp_path, sample_data, damped_params):
        initial = initial_state(sample_data.u, sample_data.tau, damped_params)
        result = run(initial, RunSettings(dt=1e-3, T=0.004, sample_every=2), checkpoint_path=tmp_path / "final.oldb")
        checkpoint = read_checkpoint(result.checkpoint)
        assert checkpoint.header.t == pytest.approx(0.004)
        np.testing.assert_array_equal(checkpoint.u, result.final_state.u.values)

    def test_blow_up_carries_diagnostics(self, sample_data, damped_params):
        initial = initial_state(sample_data.u, sample_data.tau, damped_params)
        with patch(
            "oldroyd_lab.services.oldroyd_solver.step",
            side_effect=BlowUpError("non-finite state", last_state=initial, time=0.0),
        ):
            with pytest.raises(BlowUpError) as excinfo:
                run(initial, RunSettings(dt=1e-3, T=0.01))
        assert isinstance(excinfo.value.diagnostics, Diagnostics)
        assert len(excinfo.value.diagnostics) == 1

    def test_runaway_velocity(self, sample_data, damped_params):
        initial = initial_state(sample_data.u, sample_data.tau, damped_params)

        def explode(state, dt):
            return replace(state, u=state.u * 1e7)

        with patch("oldroyd_lab.services.oldroyd_solver.step", side_effect=explode):
            with pytest.raises(BlowUpError) as excinfo:
                run(initial, RunSettings(dt=1e-3, T=0.01))
        assert excinfo.value.last_state is initial
        assert excinfo.value.time == pytest.approx(1e-3)

    def test_blow_up_scale(self, grid2):
        tau0 = TensorField.identity(grid2, 3.0)
        assert blow_up_scale(initial_state(VectorField.zeros(grid2), tau0, Params())) == pytest.approx(3.0 * math.sqrt(2.0))
        rest = initial_state(VectorField.zeros(grid2), TensorField.zeros(grid2), Params())
        assert blow_up_scale(rest) == BLOW_UP_FLOOR

    def test_below_threshold_is_not_blow_up(self, sample_data, damped_params):
        """Growth by 1e5 stays under BLOW_UP_FACTOR times a unit scale"""
        initial = initial_state(sample_data.u, sample_data.tau, damped_params)
        grown = replace(initial, u=initial.u * (1e5 / initial.u.max_abs()))

        with patch("oldroyd_lab.services.oldroyd_solver.step", side_effect=lambda state, dt: grown):
            result = run(initial, RunSettings(dt=1e-3, T=0.003))
        assert result.steps == 3
        assert BLOW_UP_FACTOR * blow_up_scale(initial) > 1e5

    def test_zero_velocity_start(self, grid2, partition2):
        """The stress alone drives the velocity; that growth is not a blow-up"""
        data = random_band(grid2, seed=0, q0=0, q1=1, amplitude=0.0, tau_amplitude=1.0, partition=partition2)
        initial = initial_state(data.u, data.tau, Params(nu=1.0))
        result = run(initial, RunSettings(dt=1e-3, T=0.05), partition2)
        assert result.steps == 50
        assert result.final_state.t == pytest.approx(0.05)
        assert result.final_state.u.max_abs() > 0.0

    def test_cfl_exhausted_mid_run(self, sample_data, damped_params):
        initial = initial_state(sample_data.u, sample_data.tau, damped_params)
        calls = []

        def outgrow(state, dt):
            calls.append(state.t)
            if len(calls) == 2:
                raise StepSizeError(f"dt={dt:g} violates the CFL limit at t={state.t:g}")
            return step(state, dt)

        with patch("oldroyd_lab.services.oldroyd_solver.step", side_effect=outgrow):
            with pytest.raises(BlowUpError) as excinfo:
                run(initial, RunSettings(dt=1e-3, T=0.01))
        error = excinfo.value
        assert isinstance(error.__cause__, StepSizeError)
        assert error.time == pytest.approx(1e-3)
        assert error.last_state.t == pytest.approx(1e-3)
        assert np.all(np.isfinite(error.last_state.u.values))
        assert isinstance(error.diagnostics, Diagnostics)

    def test_cfl_violated_on_first_step(self, sample_data, damped_params):
        initial = initial_state(sample_data.u, sample_data.tau, damped_params)
        with pytest.raises(StepSizeError):
            run(initial, RunSettings(dt=1.0, T=2.0))

    @pytest.mark.slow
    def test_growing_solution_reports_blow_up(self, grid2, partition2):
        """A stress-driven flow outgrowing a fixed step ends in BlowUpError, not StepSizeError"""
        data = random_band(grid2, seed=0, q0=0, q1=1, amplitude=0.0, tau_amplitude=500.0, partition=partition2)
        initial = initial_state(data.u, data.tau, Params(nu=0.01, a=0.0, mu=1.0))
        with pytest.raises(BlowUpError) as excinfo:
            run(initial, RunSettings(dt=5e-3, T=2.0), partition2)
        error = excinfo.value
        assert 0.0 < error.time < 2.0
        assert error.last_state.t <= error.time
        assert np.all(np.isfinite(error.last_state.u.values))

    def test_energy_decays_without_stress(self, grid2, sample_data):
        initial = initial_state(sample_data.u, TensorField.zeros(grid2), Params(nu=1.0))
        result = run(initial, RunSettings(dt=1e-3, T=0.05, sample_every=10))
        energy = result.diagnostics.column("u_l2_sq")
        assert np.all(np.diff(energy) < 0)
        assert lp_norm(result.final_state.tau, np.inf) == 0.0
