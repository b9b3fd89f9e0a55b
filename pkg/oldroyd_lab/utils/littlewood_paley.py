"""
Littlewood-Paley Toolbox
Dyadic partition of unity, frequency blocks, Besov and Chemin-Lerner norms, Bony decomposition
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .errors import BlockRangeError, ConfigurationError, SpectrumError
from .spectral import Field, Grid, GridArray, apply_multiplier, gradient, lp_norm

logger = logging.getLogger(__name__)

# chi == 1 below RAMP_START, chi == 0 above RAMP_END
RAMP_START = 0.75
RAMP_END = 4.0 / 3.0
LOG_SLACK = 1e-9


def _smooth_step_kernel(t: np.ndarray) -> np.ndarray:
    positive = t > 0.0
    safe = np.where(positive, t, 1.0)
    return np.where(positive, np.exp(-1.0 / safe), 0.0)


def chi(r) -> np.ndarray:
    """Radial low-frequency cutoff"""
    r = np.asarray(r, dtype=np.float64)
    upper = _smooth_step_kernel(RAMP_END - r)
    lower = _smooth_step_kernel(r - RAMP_START)
    return upper / (upper + lower)


def phi(r) -> np.ndarray:
    """Annulus bump, supported in [3/4, 8/3]"""
    r = np.asarray(r, dtype=np.float64)
    return chi(r / 2.0) - chi(r)


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float
    r: float

    def __post_init__(self):
        if self.p < 1 or self.r < 1:
            raise ConfigurationError(f"Besov exponents must be >= 1, got p={self.p}, r={self.r}")


@dataclass(frozen=True)
class DyadicPartition:
    """chi and the annulus bumps phi(2^-q xi) sampled on the grid for q in [q_min, q_max]"""

    grid: Grid
    q_min: int
    q_max: int

    @property
    def q_values(self) -> np.ndarray:
        return np.arange(self.q_min, self.q_max + 1)

    @property
    def block_count(self) -> int:
        return self.q_max - self.q_min + 1

    @cached_property
    def blocks(self) -> np.ndarray:
        """phi(2^-q |xi|), shape (block_count, N, ..., N)"""
        xi = self.grid.xi_norm
        return np.stack([phi(xi / 2.0 ** q) for q in self.q_values])

    def covered_shell(self) -> tuple:
        """Shell on which the truncated partition sums to one"""
        return RAMP_END * 2.0 ** self.q_min, RAMP_START * 2.0 ** (self.q_max + 1)

    def covered_mask(self) -> np.ndarray:
        low, high = self.covered_shell()
        xi = self.grid.xi_norm
        return (xi >= low) & (xi <= high)

    def partition_sum(self) -> np.ndarray:
        return self.blocks.sum(axis=0)

    def block_multiplier(self, q: int) -> np.ndarray:
        if not self.q_min <= q <= self.q_max:
            raise BlockRangeError(f"block {q} outside [{self.q_min}, {self.q_max}]")
        return self.blocks[q - self.q_min]

    def low_multiplier(self, q: int) -> np.ndarray:
        if not self.q_min - 1 <= q <= self.q_max + 1:
            raise BlockRangeError(f"low-pass index {q} outside [{self.q_min - 1}, {self.q_max + 1}]")
        return chi(self.grid.xi_norm / 2.0 ** q)

    def spectral_leakage(self, f: GridArray) -> float:
        """Fraction of spectral energy outside the covered shell"""
        energy = np.abs(f.hat) ** 2
        energy = energy.reshape((-1,) + self.grid.shape).sum(axis=0)
        total = float(energy.sum())
        if total == 0.0:
            return 0.0
        return float(energy[~self.covered_mask()].sum()) / total


def build_partition(grid: Grid) -> DyadicPartition:
    """Blocks from the lowest annulus touching the resolved shells to the last one inside the dealias band"""
    xi_min = grid.min_wavenumber
    band = xi_min * grid.N / 3.0
    # exact powers of two must not round down
    q_min = math.floor(math.log2(3.0 * xi_min / 8.0) + LOG_SLACK) + 1
    q_max = math.floor(math.log2(3.0 * band / 8.0) + LOG_SLACK)
    if q_max - q_min + 1 < 3:
        raise ConfigurationError(
            f"grid N={grid.N}, L={grid.L} hosts only blocks [{q_min}, {q_max}]; at least 3 are required"
        )
    partition = DyadicPartition(grid=grid, q_min=q_min, q_max=q_max)
    logger.debug(f"Dyadic partition built: q in [{q_min}, {q_max}]")
    return partition


def dyadic_block(f, q: int, partition: DyadicPartition):
    """Delta_q f"""
    return apply_multiplier(f, partition.block_multiplier(q))


def low_freq(f, q: int, partition: DyadicPartition):
    """S_q f"""
    return apply_multiplier(f, partition.low_multiplier(q))


def all_blocks(f: GridArray, partition: DyadicPartition) -> np.ndarray:
    """Real-space Delta_q f for every q, stacked along a new leading axis"""
    multipliers = partition.blocks.reshape((partition.block_count,) + (1,) * f.rank + f.grid.shape)
    return f.grid.inverse(f.hat[None] * multipliers)


def block_lp_norms_many(f: GridArray, partition: DyadicPartition, exponents) -> dict:
    """Per-block L^p norms for several exponents from one batch of inverse transforms"""
    blocks = all_blocks(f, partition)
    if f.rank:
        blocks = np.sqrt(np.sum(blocks.reshape((partition.block_count, -1) + f.grid.shape) ** 2, axis=1))
    else:
        blocks = np.abs(blocks)
    axes = tuple(range(1, blocks.ndim))
    norms = {}
    for p in exponents:
        if np.isinf(p):
            norms[p] = blocks.max(axis=axes)
        else:
            norms[p] = (np.sum(blocks ** p, axis=axes) * f.grid.cell_volume) ** (1.0 / p)
    return norms


def block_lp_norms(f: GridArray, partition: DyadicPartition, p: float) -> np.ndarray:
    """||Delta_q f||_{L^p} for q = q_min..q_max"""
    return block_lp_norms_many(f, partition, (p,))[p]


def weighted_sum(block_norms: np.ndarray, q_values: np.ndarray, s: float, r: float) -> float:
    weighted = 2.0 ** (q_values * s) * np.asarray(block_norms)
    if np.isinf(r):
        return float(weighted.max())
    return float(np.sum(weighted ** r) ** (1.0 / r))


@dataclass(frozen=True)
class BesovResult:
    value: float
    mean_mode_dropped: bool


def besov_norm_result(f: GridArray, params: BesovParams, partition: DyadicPartition) -> BesovResult:
    mean = np.max(np.abs(np.atleast_1d(f.mean())))
    scale = max(f.max_abs(), np.finfo(float).tiny)
    dropped = bool(mean > 1e-12 * scale)
    if dropped:
        logger.warning(f"Besov norm of a field with nonzero mean {mean:.3e}: mean mode is not represented")
    norms = block_lp_norms(f, partition, params.p)
    return BesovResult(weighted_sum(norms, partition.q_values, params.s, params.r), dropped)


def besov_norm(f: GridArray, params: BesovParams, partition: DyadicPartition) -> float:
    """Truncated homogeneous Besov norm over [q_min, q_max]"""
    return besov_norm_result(f, params, partition).value


@dataclass
class TrajectoryNorms:
    """Per-block L^p norms sampled along a trajectory"""

    times: np.ndarray
    per_block_lp: np.ndarray
    q_values: np.ndarray
    p: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.per_block_lp = np.atleast_2d(np.asarray(self.per_block_lp, dtype=np.float64))
        if self.times.size == 0:
            raise SpectrumError("trajectory has no samples")
        if self.per_block_lp.shape != (self.times.size, len(self.q_values)):
            raise ConfigurationError(
                f"per-block norms shape {self.per_block_lp.shape} does not match "
                f"{self.times.size} samples x {len(self.q_values)} blocks"
            )
        if np.any(np.diff(self.times) <= 0):
            raise ConfigurationError("trajectory times must be strictly increasing")
        if np.any(self.per_block_lp < 0):
            raise ConfigurationError("per-block norms must be non-negative")


def trajectory_norms(fields: Sequence[GridArray], times: Sequence[float], partition: DyadicPartition, p: float) -> TrajectoryNorms:
    if len(fields) == 0:
        raise SpectrumError("trajectory has no samples")
    rows = [block_lp_norms(f, partition, p) for f in fields]
    return TrajectoryNorms(times=np.asarray(times), per_block_lp=np.array(rows), q_values=partition.q_values, p=p)


def _time_norm(values: np.ndarray, times: np.ndarray, rho: float) -> np.ndarray:
    if np.isinf(rho):
        return values.max(axis=0)
    if times.size == 1:
        return np.zeros(values.shape[1:])
    return trapezoid(values ** rho, times, axis=0) ** (1.0 / rho)


def chemin_lerner_norm(traj: TrajectoryNorms, rho: float, params: BesovParams) -> float:
    """L-tilde^rho(0, T; B^s_{p,r}): time norm per block, then the weighted l^r sum"""
    if traj.p != params.p:
        raise ConfigurationError(f"trajectory sampled in L^{traj.p}, norm requested in L^{params.p}")
    per_block = _time_norm(traj.per_block_lp, traj.times, rho)
    return weighted_sum(per_block, traj.q_values, params.s, params.r)


def lebesgue_besov_norm(traj: TrajectoryNorms, rho: float, params: BesovParams) -> float:
    """L^rho(0, T; B^s_{p,r}): Besov norm per sample, then the time norm"""
    weights = 2.0 ** (traj.q_values * params.s)
    weighted = traj.per_block_lp * weights
    if np.isinf(params.r):
        per_time = weighted.max(axis=1)
    else:
        per_time = np.sum(weighted ** params.r, axis=1) ** (1.0 / params.r)
    return float(_time_norm(per_time[:, None], traj.times, rho)[0])


class BonyDecomposition(NamedTuple):
    paraproduct_fg: Field
    paraproduct_gf: Field
    remainder: Field


def bony_decompose(f: Field, g: Field, partition: DyadicPartition, tol: float = 1e-12) -> BonyDecomposition:
    """fg = T_f g + T_g f + R(f, g) with T_f g = sum_q S_{q-1} g Delta_q f"""
    for name, h in (("f", f), ("g", g)):
        leakage = partition.spectral_leakage(h)
        if leakage > tol:
            raise SpectrumError(f"spectrum of {name} leaks {leakage:.2e} of its energy outside the partition")
    f_blocks = all_blocks(f, partition)
    g_blocks = all_blocks(g, partition)
    # S_{q-1} h = sum of blocks j <= q - 2 on covered spectra
    f_low = np.zeros_like(f_blocks)
    g_low = np.zeros_like(g_blocks)
    f_low[2:] = np.cumsum(f_blocks, axis=0)[:-2]
    g_low[2:] = np.cumsum(g_blocks, axis=0)[:-2]
    t_fg = np.sum(g_low * f_blocks, axis=0)
    t_gf = np.sum(f_low * g_blocks, axis=0)
    neighbours = g_blocks.copy()
    neighbours[1:] += g_blocks[:-1]
    neighbours[:-1] += g_blocks[1:]
    remainder = np.sum(f_blocks * neighbours, axis=0)
    return BonyDecomposition(Field(f.grid, t_fg), Field(f.grid, t_gf), Field(f.grid, remainder))


class BernsteinRatios(NamedTuple):
    lebesgue_ratio: float
    gradient_ratio: float


def check_bernstein(f: Field, q: int, p: float, l: float, partition: DyadicPartition) -> BernsteinRatios:
    """Ratios whose boundedness in q is the content of the Bernstein inequalities"""
    if l < p:
        raise ConfigurationError(f"Bernstein check needs l >= p, got p={p}, l={l}")
    block = dyadic_block(f, q, partition)
    norm_p = lp_norm(block, p)
    if norm_p == 0.0:
        raise SpectrumError(f"block {q} of the test field is zero")
    d = f.grid.d
    exponent = d / p - (0.0 if np.isinf(l) else d / l)
    lebesgue_ratio = lp_norm(block, l) / (2.0 ** (q * exponent) * norm_p)
    gradient_ratio = lp_norm(gradient(block), p) / (2.0 ** q * norm_p)
    return BernsteinRatios(lebesgue_ratio, gradient_ratio)


def log_interpolation_check(
    f: GridArray,
    partition: DyadicPartition,
    big_norm: float = None,
    small_norm: float = None,
    C: float = 1.0,
) -> float:
    """C * m * log(e + big / m) - ||f||_{B^{1/2}_{4,1}} with m = ||f||_{B^{1/2}_{4,inf}}.

    big defaults to ||f||_{B^{-1/2}_{4,inf}} + ||f||_{B^{3/2}_{4,1}}.
    """
    norms = block_lp_norms(f, partition, 4.0)
    q = partition.q_values
    if small_norm is None:
        small_norm = weighted_sum(norms, q, 0.5, np.inf)
    if big_norm is None:
        big_norm = weighted_sum(norms, q, -0.5, np.inf) + weighted_sum(norms, q, 1.5, 1.0)
    if small_norm == 0.0:
        raise SpectrumError("log interpolation needs a nonzero B^{1/2}_{4,inf} norm")
    lhs = weighted_sum(norms, q, 0.5, 1.0)
    rhs = C * small_norm * math.log(math.e + big_norm / small_norm)
    return rhs - lhs
