"""
Test the seeded initial-data generators
"""

import numpy as np
import pytest

from oldroyd_lab.utils.errors import ConfigurationError, SpectrumError
from oldroyd_lab.utils.initial_data import (
    band_filter,
    cfl_time_step,
    generate,
    pure_block_mask,
    random_band,
    single_block_data,
    taylor_green,
)
from oldroyd_lab.utils.spectral import VectorField, make_grid


@pytest.mark.unit
class TestTaylorGreen:
    """Test the closed-form vortex"""

    def test_divergence_free_2d(self, grid2):
        data = taylor_green(grid2)
        assert data.u.is_divergence_free()
        assert data.u.max_abs() == pytest.approx(1.0)

    def test_divergence_free_3d(self, grid3):
        assert taylor_green(grid3, amplitude=0.3).u.is_divergence_free()

    def test_stress_off_by_default(self, grid2):
        assert taylor_green(grid2).tau.max_abs() == 0.0

    def test_stress_normalized_and_symmetric(self, grid2):
        tau = taylor_green(grid2, tau_amplitude=0.4).tau
        assert tau.max_abs() == pytest.approx(0.4)
        assert tau.is_symmetric()


@pytest.mark.unit
class TestRandomBand:
    """Test band-limited seeded noise"""

    def test_deterministic(self, grid2, partition2):
        first = random_band(grid2, 5, 0, 1, partition=partition2)
        second = random_band(grid2, 5, 0, 1, partition=partition2)
        np.testing.assert_array_equal(first.u.values, second.u.values)
        np.testing.assert_array_equal(first.tau.values, second.tau.values)

    def test_seeds_differ(self, grid2, partition2):
        first = random_band(grid2, 5, 0, 1, partition=partition2)
        second = random_band(grid2, 6, 0, 1, partition=partition2)
        assert not np.allclose(first.u.values, second.u.values)

    def test_structure(self, sample_data, partition2):
        assert sample_data.u.is_divergence_free()
        assert sample_data.tau.is_symmetric()
        assert sample_data.u.max_abs() == pytest.approx(0.5)
        assert sample_data.tau.max_abs() == pytest.approx(0.2)
        assert partition2.spectral_leakage(sample_data.u) < 1e-20

    def test_zero_amplitude(self, grid2, partition2):
        data = random_band(grid2, 1, 0, 1, amplitude=0.0, partition=partition2)
        assert data.u.max_abs() == 0.0

    def test_band_outside_partition(self, partition2):
        with pytest.raises(ConfigurationError):
            band_filter(partition2, 0, partition2.q_max + 1)
        with pytest.raises(ConfigurationError):
            band_filter(partition2, 1, 0)


@pytest.mark.unit
class TestSingleBlock:
    """Test data confined to one pure dyadic shell"""

    def test_mask_lies_in_shell(self, grid64):
        mask = pure_block_mask(grid64, 2)
        xi = grid64.xi_norm[mask]
        assert xi.min() >= 4.0 / 3.0 * 4.0
        assert xi.max() <= 6.0

    def test_unresolved_block(self):
        with pytest.raises(SpectrumError):
            pure_block_mask(make_grid(2, 16), 3)

    def test_data(self, grid64):
        data = single_block_data(grid64, 1, seed=2, amplitude=0.3, tau_amplitude=0.1)
        assert data.u.is_divergence_free()
        assert data.u.max_abs() == pytest.approx(0.3)
        assert data.tau.max_abs() == pytest.approx(0.1)


@pytest.mark.unit
class TestGenerate:
    """Test generator dispatch and the CFL estimate"""

    @pytest.mark.parametrize("name", ["taylor-green", "random-band", "single-block"])
    def test_known_generators(self, grid64, name):
        data = generate(name, grid64, seed=1, amplitude=0.5, tau_amplitude=0.5, q0=1, q1=2)
        assert data.u.max_abs() == pytest.approx(0.5)

    def test_unknown_generator(self, grid2):
        with pytest.raises(ConfigurationError):
            generate("vortex-sheet", grid2)

    def test_cfl_of_rest_state(self, grid2):
        assert cfl_time_step(VectorField.zeros(grid2)) == np.inf

    def test_cfl_value(self, grid2):
        u = taylor_green(grid2, amplitude=2.0).u
        assert cfl_time_step(u, safety=0.5) == pytest.approx(0.5 * grid2.spacing / 2.0)
