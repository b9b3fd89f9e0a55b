"""
Initial Data
Seeded generators for velocity and conformation-tensor initial data
"""

from __future__ import annotations

import logging
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigurationError, SpectrumError
from .littlewood_paley import DyadicPartition, build_partition
from .spectral import Field, Grid, GridArray, TensorField, VectorField, leray_hat

logger = logging.getLogger(__name__)

GENERATORS = ("taylor-green", "random-band", "single-block")


class InitialData(NamedTuple):
    u: VectorField
    tau: TensorField


def band_filter(partition: DyadicPartition, q0: int, q1: int) -> np.ndarray:
    if not partition.q_min <= q0 <= q1 <= partition.q_max:
        raise ConfigurationError(
            f"band [{q0}, {q1}] must lie inside the partition range [{partition.q_min}, {partition.q_max}]"
        )
    return partition.blocks[q0 - partition.q_min : q1 - partition.q_min + 1].sum(axis=0)


def _normalize(field: GridArray, amplitude: float) -> GridArray:
    peak = field.max_abs()
    if peak == 0.0 or amplitude == 0.0:
        return type(field).zeros(field.grid)
    return field * (amplitude / peak)


def taylor_green(grid: Grid, amplitude: float = 1.0, tau_amplitude: float = 0.0) -> InitialData:
    """Closed-form Taylor-Green vortex; tau is a constant-free cosine stress when tau_amplitude > 0"""
    k = grid.min_wavenumber
    x = grid.coordinates
    if grid.d == 2:
        u = np.stack([np.sin(k * x[0]) * np.cos(k * x[1]), -np.cos(k * x[0]) * np.sin(k * x[1])])
    else:
        u = np.stack(
            [
                np.sin(k * x[0]) * np.cos(k * x[1]) * np.cos(k * x[2]),
                -np.cos(k * x[0]) * np.sin(k * x[1]) * np.cos(k * x[2]),
                np.zeros(grid.shape),
            ]
        )
    tau = np.zeros((grid.d, grid.d) + grid.shape)
    profile = np.cos(k * x[0]) * np.cos(k * x[1])
    for i in range(grid.d):
        tau[i, i] = profile
    tau[0, 1] = tau[1, 0] = 0.5 * np.sin(k * x[0]) * np.sin(k * x[1])
    tau_field = _normalize(TensorField(grid, tau), tau_amplitude)
    return InitialData(VectorField(grid, amplitude * u), tau_field)


def random_band(
    grid: Grid,
    seed: int,
    q0: int,
    q1: int,
    amplitude: float = 1.0,
    tau_amplitude: float = 1.0,
    partition: Optional[DyadicPartition] = None,
) -> InitialData:
    """White noise filtered to blocks [q0, q1]; u Leray-projected, tau symmetrized, both peak-normalized"""
    partition = partition or build_partition(grid)
    band = band_filter(partition, q0, q1)
    mask = band * grid.dealias_mask
    rng = np.random.default_rng(seed)
    u_noise = rng.standard_normal((grid.d,) + grid.shape)
    tau_noise = rng.standard_normal((grid.d, grid.d) + grid.shape)

    u_hat = leray_hat(grid, grid.forward(u_noise) * mask)
    u = _normalize(VectorField.from_hat(grid, u_hat), amplitude)
    tau = TensorField(grid, tau_noise).symmetrized()
    tau = _normalize(TensorField.from_hat(grid, tau.hat * mask), tau_amplitude)
    logger.debug(f"Random-band data: seed={seed}, blocks=[{q0}, {q1}], |u|={amplitude}, |tau|={tau_amplitude}")
    return InitialData(u, tau)


def random_band_scalar(grid: Grid, seed: int, q0: int, q1: int, partition: Optional[DyadicPartition] = None) -> Field:
    partition = partition or build_partition(grid)
    band = band_filter(partition, q0, q1)
    rng = np.random.default_rng(seed)
    noise = Field(grid, rng.standard_normal(grid.shape))
    return Field.from_hat(grid, noise.hat * band * grid.dealias_mask)


def pure_block_mask(grid: Grid, q: int) -> np.ndarray:
    """Modes with 4/3 2^q <= |xi| <= 3/2 2^q, where phi(2^-q xi) = 1 and its neighbours vanish"""
    xi = grid.xi_norm
    mask = (xi >= 4.0 / 3.0 * 2.0 ** q) & (xi <= 1.5 * 2.0 ** q) & grid.dealias_mask
    if not mask.any():
        raise SpectrumError(f"no resolved modes lie purely inside block {q}")
    return mask


def single_block(grid: Grid, q: int, seed: int = 0) -> Field:
    """Seeded scalar noise confined to the pure shell of block q"""
    rng = np.random.default_rng(seed)
    noise = Field(grid, rng.standard_normal(grid.shape))
    return Field.from_hat(grid, noise.hat * pure_block_mask(grid, q))


def single_block_data(grid: Grid, q: int, seed: int, amplitude: float, tau_amplitude: float) -> InitialData:
    mask = pure_block_mask(grid, q)
    rng = np.random.default_rng(seed)
    u_noise = rng.standard_normal((grid.d,) + grid.shape)
    tau_noise = TensorField(grid, rng.standard_normal((grid.d, grid.d) + grid.shape)).symmetrized()
    u = _normalize(VectorField.from_hat(grid, leray_hat(grid, grid.forward(u_noise) * mask)), amplitude)
    tau = _normalize(TensorField.from_hat(grid, tau_noise.hat * mask), tau_amplitude)
    return InitialData(u, tau)


def generate(
    name: str,
    grid: Grid,
    seed: int = 0,
    amplitude: float = 1.0,
    tau_amplitude: float = 1.0,
    q0: int = 0,
    q1: int = 1,
    partition: Optional[DyadicPartition] = None,
) -> InitialData:
    """Dispatch on generator name"""
    if name == "taylor-green":
        return taylor_green(grid, amplitude, tau_amplitude)
    if name == "random-band":
        return random_band(grid, seed, q0, q1, amplitude, tau_amplitude, partition)
    if name == "single-block":
        return single_block_data(grid, q0, seed, amplitude, tau_amplitude)
    raise ConfigurationError(f"unknown initial-data generator {name!r}; expected one of {GENERATORS}")


def cfl_time_step(u: VectorField, safety: float = 0.5) -> float:
    """Largest dt with dt max|u| <= safety * L / N"""
    peak = u.max_abs()
    if peak == 0.0:
        return np.inf
    return safety * u.grid.spacing / peak
