"""
Test the periodic grid, fields and spectral operators
"""

import os
from unittest.mock import patch

import numpy as np
import pytest

from oldroyd_lab.utils.errors import ConfigurationError
from oldroyd_lab.utils.initial_data import random_band_scalar
from oldroyd_lab.utils.spectral import (
    Field,
    VectorField,
    deformation_tensor,
    dealias,
    divergence,
    friedrichs_project,
    get_worker_count,
    gradient,
    laplacian,
    leray_project,
    lp_norm,
    make_grid,
    parseval_l2_norm,
    velocity_gradient,
    vorticity_tensor,
)


@pytest.mark.unit
class TestGrid:
    """Test grid construction and wavenumber bookkeeping"""

    def test_unit_spacing_wavenumbers(self):
        """With L = 2 pi the wavenumbers are the integer modes"""
        grid = make_grid(2, 8)
        assert sorted(np.unique(grid.wavenumbers[0])) == list(range(-4, 4))

    def test_wavenumber_step(self):
        grid = make_grid(3, 16, 1.0)
        assert grid.min_wavenumber == pytest.approx(2.0 * np.pi)
        assert grid.shape == (16, 16, 16)

    @pytest.mark.parametrize("d, N, L", [(2, 7, 1.0), (4, 8, 1.0), (2, 4, 1.0), (2, 16, 0.0), (2, 16, -1.0)])
    def test_invalid_grid(self, d, N, L):
        with pytest.raises(ConfigurationError):
            make_grid(d, N, L)

    def test_mean_mode_is_zero_wavenumber(self, grid2):
        assert grid2.xi_norm[0, 0] == 0.0

    def test_field_shape_checked(self, grid2):
        with pytest.raises(ConfigurationError):
            VectorField(grid2, np.zeros(grid2.shape))

    def test_fields_are_read_only(self, grid2):
        f = Field(grid2, np.ones(grid2.shape))
        with pytest.raises(ValueError):
            f.values[0, 0] = 2.0


@pytest.mark.unit
class TestWorkerCount:
    """Test the OLDB_THREADS environment variable"""

    def test_default(self):
        with patch.dict(os.environ, {}, clear=True):
            assert get_worker_count() == 1

    def test_configured(self):
        with patch.dict(os.environ, {"OLDB_THREADS": "4"}):
            assert get_worker_count() == 4

    @pytest.mark.parametrize("raw", ["zero", "0", "-2"])
    def test_invalid(self, raw):
        with patch.dict(os.environ, {"OLDB_THREADS": raw}):
            with pytest.raises(ConfigurationError):
                get_worker_count()


@pytest.mark.unit
class TestDifferentialOperators:
    """Test spectral derivatives and projectors"""

    def test_gradient_of_sine(self, grid2):
        x = grid2.coordinates
        grad = gradient(Field(grid2, np.sin(x[0])))
        np.testing.assert_allclose(grad.values[0], np.cos(x[0]), atol=1e-12)
        np.testing.assert_allclose(grad.values[1], 0.0, atol=1e-12)

    def test_divergence_of_gradient_is_laplacian(self, grid2, partition2):
        f = random_band_scalar(grid2, 5, 0, 1, partition2)
        lhs = divergence(gradient(f))
        rhs = laplacian(f)
        assert lp_norm(lhs - rhs, 2.0) <= 1e-12 * lp_norm(rhs, 2.0)

    def test_laplacian_of_constant(self, grid2):
        assert lp_norm(laplacian(Field(grid2, np.full(grid2.shape, 3.0))), np.inf) < 1e-12

    def test_leray_annihilates_gradients(self, grid2, partition2):
        f = random_band_scalar(grid2, 6, -1, 2, partition2)
        assert lp_norm(leray_project(gradient(f)), 2.0) <= 1e-12 * lp_norm(gradient(f), 2.0)

    def test_leray_is_a_projection(self, grid2, rng):
        v = VectorField(grid2, rng.standard_normal((2,) + grid2.shape))
        once = leray_project(v)
        twice = leray_project(once)
        assert lp_norm(twice - once, 2.0) <= 1e-12 * lp_norm(once, 2.0)
        assert once.is_divergence_free()

    def test_leray_keeps_transverse_mode(self, grid2):
        """v_hat = (1, 0) at xi = (0, 1) is already transverse"""
        y = grid2.coordinates[1]
        v = VectorField(grid2, np.stack([np.cos(y), np.zeros(grid2.shape)]))
        assert lp_norm(leray_project(v) - v, np.inf) < 1e-12

    def test_friedrichs_keeps_unit_shell(self, grid2):
        x, y = grid2.coordinates
        f = Field(grid2, np.cos(x) + np.sin(y))
        assert lp_norm(friedrichs_project(f, 1) - f, np.inf) < 1e-12

    def test_friedrichs_removes_outer_mode(self, grid2):
        f = Field(grid2, np.cos(5.0 * grid2.coordinates[0]))
        assert lp_norm(friedrichs_project(f, 4), np.inf) < 1e-12

    def test_friedrichs_removes_mean(self, grid2, rng):
        f = Field(grid2, rng.standard_normal(grid2.shape))
        projected = friedrichs_project(f, grid2.N)
        np.testing.assert_allclose(projected.values, f.values - f.values.mean(), atol=1e-12)

    def test_friedrichs_commutes_with_leray(self, grid2, rng):
        v = VectorField(grid2, rng.standard_normal((2,) + grid2.shape))
        a = friedrichs_project(leray_project(v), 3)
        b = leray_project(friedrichs_project(v, 3))
        assert lp_norm(a - b, 2.0) <= 1e-12 * lp_norm(v, 2.0)

    def test_vorticity_and_deformation_of_shear(self, grid2):
        y = grid2.coordinates[1]
        u = VectorField(grid2, np.stack([np.sin(y), np.zeros(grid2.shape)]))
        omega = vorticity_tensor(u)
        deform = deformation_tensor(u)
        np.testing.assert_allclose(omega.values[0, 1], 0.5 * np.cos(y), atol=1e-12)
        np.testing.assert_allclose(deform.values[0, 1], 0.5 * np.cos(y), atol=1e-12)
        np.testing.assert_allclose((omega + deform).values, velocity_gradient(u).values, atol=1e-12)
        assert np.max(np.abs(omega.values + omega.transpose().values)) < 1e-14
        assert deform.asymmetry() == 0.0


@pytest.mark.unit
class TestDealiasAndNorms:
    """Test the 2/3 rule, quadrature norms and Parseval"""

    def test_dealias_idempotent(self, grid2, rng):
        f = Field(grid2, rng.standard_normal(grid2.shape))
        once = dealias(f)
        assert lp_norm(dealias(once) - once, np.inf) < 1e-12

    def test_dealias_band(self, grid2, rng):
        f = dealias(Field(grid2, rng.standard_normal(grid2.shape)))
        outside = ~grid2.dealias_mask
        assert np.max(np.abs(f.hat[outside])) < 1e-10

    def test_band_limited_unchanged(self, grid2):
        f = Field(grid2, np.cos(8.0 * grid2.coordinates[0]))
        assert lp_norm(dealias(f) - f, np.inf) < 1e-12

    def test_constant_l2(self, grid2):
        f = Field(grid2, np.full(grid2.shape, -2.0))
        assert lp_norm(f, 2.0) == pytest.approx(2.0 * grid2.L, rel=1e-12)

    def test_sine_l2(self, grid2):
        f = Field(grid2, np.sin(grid2.coordinates[0]))
        assert lp_norm(f, 2.0) == pytest.approx(np.sqrt(2.0 * np.pi ** 2), rel=1e-12)

    def test_sine_sup(self, grid2):
        value = lp_norm(Field(grid2, np.sin(grid2.coordinates[0])), np.inf)
        assert 1.0 - 1e-2 <= value <= 1.0

    def test_parseval(self, grid2, rng):
        f = Field(grid2, rng.standard_normal(grid2.shape))
        assert parseval_l2_norm(f) == pytest.approx(lp_norm(f, 2.0), rel=1e-12)

    def test_round_trip(self, grid2, rng):
        values = rng.standard_normal(grid2.shape)
        restored = grid2.inverse(grid2.forward(values))
        assert np.linalg.norm(restored - values) <= 1e-12 * np.linalg.norm(values)

    def test_exponent_below_one_rejected(self, grid2):
        with pytest.raises(ConfigurationError):
            lp_norm(Field.zeros(grid2), 0.5)
