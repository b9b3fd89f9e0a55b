"""
Heat Semigroup
Heat propagator, mild Stokes solver and measured kernel decay bounds
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy.integrate import trapezoid

from .errors import ConfigurationError, DivergenceError, StepSizeError
from .littlewood_paley import DyadicPartition, block_lp_norms, dyadic_block, weighted_sum
from .lorentz import weak_lp_norm
from .spectral import (
    Field,
    Grid,
    GridArray,
    TensorField,
    VectorField,
    apply_multiplier,
    gradient,
    leray_hat,
    lp_norm,
    tensor_divergence,
)

logger = logging.getLogger(__name__)

Forcing = Union[Callable[[float], VectorField], Sequence[VectorField]]


def heat_multiplier(grid: Grid, t: float, nu: float) -> np.ndarray:
    if t < 0:
        raise StepSizeError(f"heat propagation needs t >= 0, got {t}")
    if nu <= 0:
        raise ConfigurationError(f"viscosity must be positive, got {nu}")
    return np.exp(-nu * t * grid.xi_norm_sq)


def heat_propagate(f: GridArray, t: float, nu: float) -> GridArray:
    """e^{nu t Delta} f"""
    return apply_multiplier(f, heat_multiplier(f.grid, t, nu))


@dataclass
class DuhamelTrajectory:
    times: np.ndarray
    states: List[VectorField]
    forcing: List[VectorField] = field(default_factory=list)

    @property
    def final(self) -> VectorField:
        return self.states[-1]


def _sample_forcing(forcing: Forcing, times: np.ndarray) -> List[VectorField]:
    if callable(forcing):
        return [forcing(float(t)) for t in times]
    samples = list(forcing)
    if len(samples) != times.size:
        raise ConfigurationError(f"forcing has {len(samples)} samples for {times.size} nodes")
    return samples


def stokes_mild_solve(u0: VectorField, forcing: Forcing, nu: float, times: Sequence[float]) -> DuhamelTrajectory:
    """u(t) = e^{nu t Delta} u0 + int_0^t P e^{nu (t-s) Delta} g(s) ds.

    Exact propagation between nodes, trapezoid rule in s.
    """
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0):
        raise StepSizeError("Duhamel nodes must be a non-empty strictly increasing sequence")
    if not u0.is_divergence_free():
        raise DivergenceError("initial velocity must be Leray-projected before a Stokes solve")
    grid = u0.grid
    samples = _sample_forcing(forcing, times)
    projected = [leray_hat(grid, g.hat) for g in samples]

    u_hat = u0.hat
    states = [u0]
    for n in range(times.size - 1):
        dt = times[n + 1] - times[n]
        decay = heat_multiplier(grid, dt, nu)
        u_hat = decay * u_hat + 0.5 * dt * (decay * projected[n] + projected[n + 1])
        states.append(VectorField.from_hat(grid, u_hat))
    return DuhamelTrajectory(times=times, states=states, forcing=samples)


class BlockDecayFit(NamedTuple):
    c: float
    C: float


def fit_block_decay(
    f: GridArray,
    q: int,
    partition: DyadicPartition,
    nu: float,
    times: Sequence[float],
    p: float = 2.0,
) -> BlockDecayFit:
    """Fit ||e^{nu t Delta} Delta_q f||_p <= C e^{-c nu t 4^q} ||Delta_q f||_p.

    C is the largest measured ratio; c the smallest rate compatible with it.
    """
    block = dyadic_block(f, q, partition)
    base = lp_norm(block, p)
    if base == 0.0:
        raise ConfigurationError(f"block {q} of the test field is zero")
    times = np.asarray(times, dtype=np.float64)
    ratios = np.array([lp_norm(heat_propagate(block, t, nu), p) / base for t in times])
    C = float(ratios.max())
    positive = times > 0
    rates = np.log(C / ratios[positive]) / (nu * times[positive] * 4.0 ** q)
    return BlockDecayFit(float(rates.min()), C)


def stokes_chemin_lerner_ratio(
    trajectory: DuhamelTrajectory,
    partition: DyadicPartition,
    nu: float,
    s: float,
    p: float,
    r: float,
    rho: float,
    rho1: float,
) -> float:
    """LHS / RHS of nu^{1/rho} ||u||_{L~^rho B^{s+2/rho}} <= ||u0||_{B^s} + nu^{1/rho1-1} ||Pg||_{L~^rho1 B^{s-2+2/rho1}}"""
    times = trajectory.times
    grid = trajectory.states[0].grid
    u_blocks = np.array([block_lp_norms(u, partition, p) for u in trajectory.states])
    g_blocks = np.array(
        [block_lp_norms(VectorField.from_hat(grid, leray_hat(grid, g.hat)), partition, p) for g in trajectory.forcing]
    )
    q = partition.q_values

    def time_norm(values: np.ndarray, exponent: float) -> np.ndarray:
        if np.isinf(exponent):
            return values.max(axis=0)
        return trapezoid(values ** exponent, times, axis=0) ** (1.0 / exponent)

    inv_rho = 0.0 if np.isinf(rho) else 1.0 / rho
    inv_rho1 = 0.0 if np.isinf(rho1) else 1.0 / rho1
    lhs = nu ** inv_rho * weighted_sum(time_norm(u_blocks, rho), q, s + 2.0 * inv_rho, r)
    rhs = weighted_sum(u_blocks[0], q, s, r)
    rhs += nu ** (inv_rho1 - 1.0) * weighted_sum(time_norm(g_blocks, rho1), q, s - 2.0 + 2.0 * inv_rho1, r)
    if rhs == 0.0:
        return 0.0
    return lhs / rhs


def default_test_fields(grid: Grid, p: float, seed: int = 0, random_count: int = 4) -> List[Field]:
    """Test-field corpus: a unit-mass delta for p = 1, axis modes and seeded band-limited noise otherwise"""
    test_fields: List[Field] = []
    if p == 1:
        delta = np.zeros(grid.shape)
        delta[(0,) * grid.d] = 1.0 / grid.cell_volume
        test_fields.append(Field(grid, delta))
        return test_fields
    x = grid.coordinates[0]
    for k in range(1, grid.N // 3 + 1):
        test_fields.append(Field(grid, np.cos(k * grid.min_wavenumber * x)))
    rng = np.random.default_rng(seed)
    mask = grid.dealias_mask.astype(np.float64)
    for _ in range(random_count):
        noise = Field(grid, rng.standard_normal(grid.shape))
        test_fields.append(apply_multiplier(noise, mask))
    return test_fields


class GradKernelFit(NamedTuple):
    constant: float
    scaled_norms: np.ndarray
    spread: float
    stable: bool


def verify_grad_kernel_bound(
    grid: Grid,
    p: float,
    q: float,
    taus: Sequence[float],
    test_fields: Optional[Sequence[Field]] = None,
    tolerance: float = 0.2,
) -> GradKernelFit:
    """sup over tau of max-over-test-fields ||e^{tau Delta} grad f||_q / ||f||_p scaled by tau^{(d/2)(1/p-1/q)+1/2}"""
    if q < p:
        raise ConfigurationError(f"kernel bound needs q >= p, got p={p}, q={q}")
    if test_fields is None:
        test_fields = default_test_fields(grid, p)
    inv_q = 0.0 if np.isinf(q) else 1.0 / q
    exponent = 0.5 * grid.d * (1.0 / p - inv_q) + 0.5
    scaled = []
    for tau in taus:
        if tau <= 0:
            raise StepSizeError(f"kernel check needs tau > 0, got {tau}")
        best = 0.0
        for f in test_fields:
            denominator = lp_norm(f, p)
            if denominator == 0.0:
                continue
            smoothed = heat_propagate(gradient(f), tau, 1.0)
            best = max(best, lp_norm(smoothed, q) / denominator)
        scaled.append(best * tau ** exponent)
    scaled = np.array(scaled)
    spread = float(scaled.max() / scaled.min() - 1.0) if scaled.min() > 0 else np.inf
    # within +-tolerance of the mean value
    centre = scaled.mean()
    stable = bool(np.all(np.abs(scaled - centre) <= tolerance * centre))
    return GradKernelFit(float(scaled.max()), scaled, spread, stable)


def duhamel_lorentz_ratio(forcing: Sequence[TensorField], times: Sequence[float], nu: float) -> float:
    """sup_t ||int P e^{nu(t-s)Delta} div F ds||_{L^{d,inf}} / sup_t ||F||_{L^{d/2,inf}}"""
    grid = forcing[0].grid
    d = grid.d
    sources = [tensor_divergence(F) for F in forcing]
    trajectory = stokes_mild_solve(VectorField.zeros(grid), sources, nu, times)
    lhs = max(weak_lp_norm(u, float(d)).value for u in trajectory.states)
    rhs = max(weak_lp_norm(F, d / 2.0).value for F in forcing)
    if rhs == 0.0:
        return 0.0
    return lhs / rhs
