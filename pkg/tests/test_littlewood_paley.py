"""
Test the dyadic partition, Besov and Chemin-Lerner norms and the Bony decomposition
"""

import numpy as np
import pytest

from oldroyd_lab.utils.errors import BlockRangeError, ConfigurationError, SpectrumError
from oldroyd_lab.utils.initial_data import random_band_scalar, single_block
from oldroyd_lab.utils.littlewood_paley import (
    BesovParams,
    TrajectoryNorms,
    besov_norm,
    besov_norm_result,
    block_lp_norms,
    bony_decompose,
    build_partition,
    chemin_lerner_norm,
    check_bernstein,
    chi,
    dyadic_block,
    lebesgue_besov_norm,
    log_interpolation_check,
    low_freq,
    phi,
    trajectory_norms,
)
from oldroyd_lab.utils.semigroup import heat_propagate
from oldroyd_lab.utils.spectral import Field, lp_norm, make_grid


@pytest.mark.unit
class TestPartition:
    """Test the bump functions and the block range"""

    @pytest.mark.parametrize("N, expected", [(128, (-1, 4)), (64, (-1, 3)), (32, (-1, 2))])
    def test_block_range(self, N, expected):
        partition = build_partition(make_grid(2, N))
        assert (partition.q_min, partition.q_max) == expected

    def test_too_small_grid(self):
        with pytest.raises(ConfigurationError):
            build_partition(make_grid(2, 8))

    def test_chi_support(self):
        assert chi(0.5) == 1.0
        assert chi(1.4) == 0.0
        assert 0.0 < chi(1.0) < 1.0

    def test_phi_support(self):
        assert phi(0.7) == 0.0
        assert phi(2.7) == 0.0
        assert phi(1.5) == pytest.approx(1.0)

    def test_chi_decreasing(self):
        r = np.linspace(0.0, 2.0, 201)
        assert np.all(np.diff(chi(r)) <= 0.0)

    def test_partition_of_unity(self, partition64):
        covered = partition64.covered_mask()
        assert covered.any()
        assert np.max(np.abs(partition64.partition_sum()[covered] - 1.0)) <= 1e-12

    def test_block_index_range(self, grid2, partition2):
        f = Field(grid2, np.cos(grid2.coordinates[0]))
        with pytest.raises(BlockRangeError):
            dyadic_block(f, partition2.q_max + 1, partition2)
        with pytest.raises(BlockRangeError):
            low_freq(f, partition2.q_max + 2, partition2)


@pytest.mark.unit
class TestBlocks:
    """Test dyadic blocks on constructed spectra"""

    def test_pure_shell_field_is_its_own_block(self, grid64, partition64):
        f = single_block(grid64, 2, seed=1)
        assert lp_norm(dyadic_block(f, 2, partition64) - f, np.inf) <= 1e-12 * lp_norm(f, np.inf)

    def test_mode_at_one_and_a_half_octaves(self, grid64, partition64):
        f = Field(grid64, np.cos(6.0 * grid64.coordinates[0]))
        assert lp_norm(dyadic_block(f, 2, partition64) - f, np.inf) < 1e-12

    def test_separated_blocks_are_orthogonal(self, grid64, partition64):
        f = random_band_scalar(grid64, 2, 0, 2, partition64)
        for j in range(partition64.q_min, partition64.q_max - 1):
            overlap = dyadic_block(dyadic_block(f, j, partition64), j + 2, partition64)
            assert lp_norm(overlap, np.inf) <= 1e-13 * lp_norm(f, np.inf)

    def test_blocks_sum_to_field(self, grid64, partition64):
        f = random_band_scalar(grid64, 4, 0, 2, partition64)
        total = sum((dyadic_block(f, q, partition64) for q in partition64.q_values), Field.zeros(grid64))
        assert lp_norm(total - f, np.inf) <= 1e-10 * lp_norm(f, np.inf)

    def test_no_leakage_inside_band(self, grid64, partition64):
        f = random_band_scalar(grid64, 4, partition64.q_min + 1, partition64.q_max - 1, partition64)
        assert partition64.spectral_leakage(f) == 0.0


@pytest.mark.unit
class TestBesovNorms:
    """Test Besov and Chemin-Lerner norms"""

    def test_single_block_norm(self, grid64, partition64):
        f = single_block(grid64, 2, seed=3)
        block = lp_norm(f, 2.0)
        for r in (1.0, 2.0, np.inf):
            assert besov_norm(f, BesovParams(0.5, 2.0, r), partition64) == pytest.approx(2.0 ** 1.0 * block, rel=1e-12)

    def test_l2_equivalence(self, grid64, partition64):
        f = random_band_scalar(grid64, 8, partition64.q_min + 1, partition64.q_max - 1, partition64)
        ratio = besov_norm(f, BesovParams(0.0, 2.0, 2.0), partition64) / lp_norm(f, 2.0)
        assert 1.0 / np.sqrt(2.0) <= ratio <= np.sqrt(2.0)

    def test_summation_monotone(self, grid64, partition64):
        f = random_band_scalar(grid64, 9, 0, 2, partition64)
        assert besov_norm(f, BesovParams(1.0, 2.0, np.inf), partition64) <= besov_norm(f, BesovParams(1.0, 2.0, 1.0), partition64)

    def test_mean_mode_flagged(self, grid2, partition2):
        f = Field(grid2, 1.0 + np.cos(grid2.coordinates[0]))
        assert besov_norm_result(f, BesovParams(0.0, 2.0, 1.0), partition2).mean_mode_dropped

    def test_invalid_exponent(self):
        with pytest.raises(ConfigurationError):
            BesovParams(0.0, 0.5, 1.0)

    def test_single_sample_chemin_lerner(self, grid64, partition64):
        f = random_band_scalar(grid64, 1, 0, 2, partition64)
        params = BesovParams(0.5, 2.0, 1.0)
        traj = trajectory_norms([f], [0.0], partition64, 2.0)
        assert chemin_lerner_norm(traj, np.inf, params) == pytest.approx(besov_norm(f, params, partition64), rel=1e-12)

    def test_constant_trajectory(self, grid64, partition64):
        f = random_band_scalar(grid64, 1, 0, 2, partition64)
        params = BesovParams(0.5, 2.0, 1.0)
        times = np.linspace(0.0, 0.3, 7)
        traj = trajectory_norms([f] * times.size, times, partition64, 2.0)
        assert chemin_lerner_norm(traj, 1.0, params) == pytest.approx(0.3 * besov_norm(f, params, partition64), rel=1e-12)

    def test_chemin_lerner_dominates_lebesgue(self, grid64, partition64):
        f = random_band_scalar(grid64, 2, 0, 2, partition64)
        times = np.linspace(0.0, 0.5, 11)
        traj = trajectory_norms([heat_propagate(f, float(t), 1.0) for t in times], times, partition64, 2.0)
        params = BesovParams(0.0, 2.0, 1.0)
        assert chemin_lerner_norm(traj, np.inf, params) >= lebesgue_besov_norm(traj, np.inf, params)
        assert chemin_lerner_norm(traj, 1.0, params) == pytest.approx(lebesgue_besov_norm(traj, 1.0, params), rel=1e-12)

    def test_trajectory_validation(self, partition2):
        q = partition2.q_values
        with pytest.raises(SpectrumError):
            TrajectoryNorms(times=[], per_block_lp=np.zeros((0, q.size)), q_values=q, p=2.0)
        with pytest.raises(ConfigurationError):
            TrajectoryNorms(times=[0.0, 0.0], per_block_lp=np.ones((2, q.size)), q_values=q, p=2.0)

    def test_exponent_mismatch(self, grid64, partition64):
        f = random_band_scalar(grid64, 1, 0, 2, partition64)
        traj = trajectory_norms([f], [0.0], partition64, 2.0)
        with pytest.raises(ConfigurationError):
            chemin_lerner_norm(traj, 1.0, BesovParams(0.0, 4.0, 1.0))


@pytest.mark.unit
class TestBony:
    """Test the paraproduct and remainder split"""

    def test_reconstruction(self, grid64, partition64):
        low, high = partition64.q_min + 1, partition64.q_max - 1
        f = random_band_scalar(grid64, 11, low, high, partition64)
        g = random_band_scalar(grid64, 12, low, high, partition64)
        parts = bony_decompose(f, g, partition64)
        product = f * g
        rebuilt = parts.paraproduct_fg + parts.paraproduct_gf + parts.remainder
        assert lp_norm(product - rebuilt, np.inf) <= 1e-10 * lp_norm(product, np.inf)

    def test_single_block_square_is_remainder(self, grid64, partition64):
        f = single_block(grid64, 2, seed=5)
        parts = bony_decompose(f, f, partition64)
        assert lp_norm(parts.paraproduct_fg, np.inf) < 1e-12
        assert lp_norm(parts.paraproduct_gf, np.inf) < 1e-12
        assert lp_norm(parts.remainder - f * f, np.inf) <= 1e-12 * lp_norm(f * f, np.inf)

    def test_separated_blocks(self, grid64, partition64):
        """Low-frequency g times high-frequency f lands in the first paraproduct"""
        f = single_block(grid64, 3, seed=6)
        g = single_block(grid64, 0, seed=7)
        parts = bony_decompose(f, g, partition64)
        assert lp_norm(parts.remainder, np.inf) < 1e-12
        assert lp_norm(parts.paraproduct_gf, np.inf) < 1e-12
        assert lp_norm(parts.paraproduct_fg - f * g, np.inf) <= 1e-12 * lp_norm(f * g, np.inf)

    def test_leaking_spectrum_rejected(self, grid64, partition64):
        f = Field(grid64, np.cos(30.0 * grid64.coordinates[0]))
        with pytest.raises(SpectrumError):
            bony_decompose(f, f, partition64)


@pytest.mark.unit
class TestBernsteinAndInterpolation:
    """Test the Bernstein ratios and the logarithmic interpolation gap"""

    def test_single_mode_gradient_ratio(self, grid64, partition64):
        f = Field(grid64, np.cos(4.0 * grid64.coordinates[0]))
        ratios = check_bernstein(f, 2, 2.0, 2.0, partition64)
        assert ratios.gradient_ratio == pytest.approx(1.0, rel=1e-12)
        assert ratios.lebesgue_ratio == pytest.approx(1.0, rel=1e-12)

    def test_gradient_ratio_in_annulus(self, grid64, partition64):
        f = random_band_scalar(grid64, 3, 0, 2, partition64)
        for q in range(0, 3):
            ratio = check_bernstein(f, q, 2.0, 2.0, partition64).gradient_ratio
            assert 0.75 <= ratio <= 8.0 / 3.0

    def test_zero_block(self, grid64, partition64):
        f = single_block(grid64, 3, seed=1)
        with pytest.raises(SpectrumError):
            check_bernstein(f, 0, 2.0, 2.0, partition64)

    def test_exponent_order(self, grid64, partition64):
        f = single_block(grid64, 2, seed=1)
        with pytest.raises(ConfigurationError):
            check_bernstein(f, 2, 4.0, 2.0, partition64)

    def test_single_block_gap_nonnegative(self, grid64, partition64):
        f = single_block(grid64, 2, seed=2)
        assert log_interpolation_check(f, partition64) >= 0.0

    def test_zero_field(self, grid64, partition64):
        with pytest.raises(SpectrumError):
            log_interpolation_check(Field.zeros(grid64), partition64)

    def test_block_norms_shape(self, grid64, partition64):
        f = random_band_scalar(grid64, 3, 0, 2, partition64)
        assert block_lp_norms(f, partition64, 2.0).shape == (partition64.block_count,)
