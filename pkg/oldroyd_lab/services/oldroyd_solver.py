"""
Oldroyd-B Solver
Pseudo-spectral time integration of the generalized corotational Oldroyd-B system
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from ..utils.checkpoint import write_checkpoint
from ..utils.errors import BlowUpError, StepSizeError
from ..utils.initial_data import cfl_time_step
from ..utils.littlewood_paley import DyadicPartition, block_lp_norms_many, build_partition, weighted_sum
from ..utils.lorentz import weak_lp_norm
from ..utils.spectral import Grid, TensorField, VectorField, friedrichs_mask, leray_hat, lp_norm

logger = logging.getLogger(__name__)

BLOW_UP_FACTOR = 1e6
BLOW_UP_FLOOR = 1.0
DIAGNOSTIC_COLUMNS = [
    "time",
    "u_l2_sq",
    "nu_grad_u_l2_sq_int",
    "tau_l2",
    "tau_lp",
    "u_besov_inf_m1",
    "u_besov_inf_1_int",
    "tau_besov_inf_0",
    "tau_besov_p",
    "u_weak_d",
    "tau_weak_d2",
]


class Params(BaseModel):
    """Physical parameters of the system"""

    model_config = ConfigDict(frozen=True)

    nu: float = Field(1.0, gt=0, description="Viscosity")
    a: float = Field(0.0, ge=0, description="Damping rate of the stress")
    mu: float = Field(0.0, ge=0, description="Coupling of the deformation tensor into the stress")
    b: float = Field(0.0, ge=-1, le=1, description="Slip parameter of the bilinear term")
    friedrichs_n: Optional[int] = Field(None, ge=1, description="Annulus index of the Friedrichs projector")


@dataclass(frozen=True)
class SimState:
    t: float
    u: VectorField
    tau: TensorField
    params: Params

    @property
    def grid(self) -> Grid:
        return self.u.grid


def _swap(values: np.ndarray) -> np.ndarray:
    return np.swapaxes(values, 0, 1)


def _mean_index(grid: Grid) -> Tuple:
    return (slice(None),) + (0,) * grid.d


def nonlinear_terms(
    grid: Grid, u_hat: np.ndarray, tau_hat: np.ndarray, params: Params, velocity: bool = True
) -> Tuple[Optional[np.ndarray], np.ndarray]:
    """Spectral nonlinear parts: P(-u.grad u + div tau) and -u.grad tau - Q(u, tau) + mu D.

    With velocity=False only the stress part is formed; u then acts as a frozen drift.
    """
    mask = grid.dealias_mask
    xi = grid.derivative_wavenumbers
    u_hat = u_hat * mask
    tau_hat = tau_hat * mask

    u = grid.inverse(u_hat)
    tau = grid.inverse(tau_hat)
    grad_u = grid.inverse(1j * u_hat[:, None] * xi[None, :])
    grad_tau = grid.inverse(1j * tau_hat[:, :, None] * xi[None, None, :])

    omega = 0.5 * (grad_u - _swap(grad_u))
    deform = 0.5 * (grad_u + _swap(grad_u))
    jn = None
    if params.friedrichs_n is not None:
        jn = friedrichs_mask(grid, params.friedrichs_n)
        omega = grid.inverse(grid.forward(omega) * jn)

    tau_rhs = -np.einsum("k...,ijk...->ij...", u, grad_tau)
    tau_rhs -= np.einsum("ik...,kj...->ij...", tau, omega) - np.einsum("ik...,kj...->ij...", omega, tau)
    if params.b != 0.0:
        tau_rhs -= params.b * (
            np.einsum("ik...,kj...->ij...", deform, tau) + np.einsum("ik...,kj...->ij...", tau, deform)
        )
    if params.mu != 0.0:
        tau_rhs += params.mu * deform

    if not velocity:
        return None, grid.forward(tau_rhs)
    advection_hat = grid.forward(np.einsum("k...,ik...->i...", u, grad_u))
    u_rhs_hat = -advection_hat + np.sum(1j * tau_hat * xi[None, :], axis=1)
    if jn is not None:
        u_rhs_hat = u_rhs_hat * jn
    return leray_hat(grid, u_rhs_hat), grid.forward(tau_rhs)


def _constrain(grid: Grid, u_hat: np.ndarray, tau_hat: np.ndarray, params: Params) -> Tuple[np.ndarray, np.ndarray]:
    """Symmetrize tau, project u onto mean-zero divergence-free fields, dealias both"""
    mask = grid.dealias_mask
    tau_hat = 0.5 * (tau_hat + _swap(tau_hat)) * mask
    u_hat = leray_hat(grid, u_hat * mask)
    u_hat[_mean_index(grid)] = 0.0
    if params.friedrichs_n is not None:
        u_hat = u_hat * friedrichs_mask(grid, params.friedrichs_n)
    return u_hat, tau_hat


def initial_state(u0: VectorField, tau0: TensorField, params: Params, t: float = 0.0) -> SimState:
    """Admissible state from raw data; J_n is applied to u0 in the Friedrichs variant"""
    grid = u0.grid
    u_hat, tau_hat = _constrain(grid, u0.hat, tau0.hat, params)
    return SimState(t, VectorField.from_hat(grid, u_hat), TensorField.from_hat(grid, tau_hat), params)


def rhs_tau(state: SimState) -> TensorField:
    """-u.grad tau - a tau - (tau omega - omega tau) - b(D tau + tau D) + mu D"""
    grid = state.grid
    _, tau_rhs_hat = nonlinear_terms(grid, state.u.hat, state.tau.hat, state.params, velocity=False)
    return TensorField.from_hat(grid, tau_rhs_hat - state.params.a * state.tau.hat)


def rhs_u(state: SimState) -> VectorField:
    """P(-u.grad u + div tau); the viscous term lives in the integrating factor"""
    grid = state.grid
    u_rhs_hat, _ = nonlinear_terms(grid, state.u.hat, state.tau.hat, state.params)
    return VectorField.from_hat(grid, u_rhs_hat)


def step(state: SimState, dt: float) -> SimState:
    """One Heun step with exact integrating factors for -nu Laplacian and -a"""
    if not dt > 0 or not math.isfinite(dt):
        raise StepSizeError(f"time step must be positive and finite, got {dt}")
    limit = cfl_time_step(state.u)
    if dt > limit * (1.0 + 1e-12):
        raise StepSizeError(f"dt={dt:g} violates the CFL limit {limit:g} at t={state.t:g}")

    grid = state.grid
    params = state.params
    decay_u = np.exp(-params.nu * dt * grid.xi_norm_sq)
    decay_tau = math.exp(-params.a * dt)
    u_hat = state.u.hat
    tau_hat = state.tau.hat

    k1_u, k1_tau = nonlinear_terms(grid, u_hat, tau_hat, params)
    u_pred = decay_u * (u_hat + dt * k1_u)
    tau_pred = decay_tau * (tau_hat + dt * k1_tau)
    k2_u, k2_tau = nonlinear_terms(grid, u_pred, tau_pred, params)

    u_new = decay_u * u_hat + 0.5 * dt * (decay_u * k1_u + k2_u)
    tau_new = decay_tau * tau_hat + 0.5 * dt * (decay_tau * k1_tau + k2_tau)
    u_new, tau_new = _constrain(grid, u_new, tau_new, params)
    if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(tau_new))):
        raise BlowUpError(f"non-finite state after step at t={state.t:g}", last_state=state, time=state.t)
    return SimState(
        state.t + dt,
        VectorField.from_hat(grid, u_new),
        TensorField.from_hat(grid, tau_new),
        params,
    )


def skew_residual(state: SimState) -> float:
    """|<omega tau - tau omega, tau>| / (||grad u||_inf ||tau||_2^2)"""
    grid = state.grid
    xi = grid.derivative_wavenumbers
    grad_u = grid.inverse(1j * state.u.hat[:, None] * xi[None, :])
    omega = 0.5 * (grad_u - _swap(grad_u))
    tau = state.tau.values
    commutator = np.einsum("ik...,kj...->ij...", omega, tau) - np.einsum("ik...,kj...->ij...", tau, omega)
    pairing = abs(float(np.sum(commutator * tau) * grid.cell_volume))
    grad_sup = float(np.max(np.sqrt(np.sum(grad_u.reshape((-1,) + grid.shape) ** 2, axis=0))))
    scale = grad_sup * lp_norm(state.tau, 2.0) ** 2
    if scale == 0.0:
        return 0.0
    return pairing / scale


def _spectral_l2_sq(grid: Grid, hat: np.ndarray, weight: Optional[np.ndarray] = None) -> float:
    power = np.abs(hat) ** 2
    if weight is not None:
        power = power * weight
    return float(grid.volume * np.sum(power) / grid.N ** (2 * grid.d))


def divergence_residual(state: SimState) -> float:
    """||div u||_2 / ||grad u||_2 from spectral coefficients"""
    grid = state.grid
    div_hat = np.sum(1j * grid.derivative_wavenumbers * state.u.hat, axis=0)
    grad_sq = _spectral_l2_sq(grid, state.u.hat, grid.xi_norm_sq)
    if grad_sq == 0.0:
        return 0.0
    return math.sqrt(_spectral_l2_sq(grid, div_hat) / grad_sq)


@dataclass
class InvariantLog:
    """Worst structural residuals seen over a run"""

    max_asymmetry: float = 0.0
    max_divergence: float = 0.0
    max_skew_residual: float = 0.0
    steps: int = 0

    def update(self, state: SimState) -> None:
        self.max_asymmetry = max(self.max_asymmetry, state.tau.asymmetry())
        self.max_divergence = max(self.max_divergence, divergence_residual(state))
        self.max_skew_residual = max(self.max_skew_residual, skew_residual(state))
        self.steps += 1


@dataclass
class Diagnostics:
    """Sampled time series; rows carry the CSV columns plus auxiliary integrals"""

    p: float
    rows: List[Dict[str, float]] = field(default_factory=list)

    def append(self, row: Dict[str, float]) -> None:
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows], dtype=np.float64)

    @property
    def times(self) -> np.ndarray:
        return self.column("time")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=DIAGNOSTIC_COLUMNS)

    def __len__(self) -> int:
        return len(self.rows)


class RunSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    dt: float = Field(1e-3, gt=0, description="Requested time step")
    T: float = Field(1.0, ge=0, description="Horizon")
    sample_every: int = Field(10, ge=1, description="Steps between diagnostic samples")
    p: float = Field(2.0, ge=1, description="Lebesgue exponent of the tau_lp and tau_besov_p columns")


@dataclass
class RunResult:
    diagnostics: Diagnostics
    final_state: SimState
    invariants: InvariantLog
    steps: int
    dt: float
    checkpoint: Optional[Path] = None


class _Integrals:
    """Running trapezoid integrals of the per-step integrands"""

    NAMES = ("nu_grad_u_l2_sq", "u_besov_inf_1", "tau_l2_sq", "grad_u_l2_sq", "u_besov_p_high")

    def __init__(self, integrand: Dict[str, float]):
        self.last = integrand
        self.total = {name: 0.0 for name in self.NAMES}

    def advance(self, integrand: Dict[str, float], dt: float) -> None:
        for name in self.NAMES:
            self.total[name] += 0.5 * dt * (self.last[name] + integrand[name])
        self.last = integrand


def _integrands(state: SimState, partition: DyadicPartition, p: float) -> Dict[str, float]:
    grid = state.grid
    d = grid.d
    grad_sq = _spectral_l2_sq(grid, state.u.hat, grid.xi_norm_sq)
    u_blocks = block_lp_norms_many(state.u, partition, {np.inf, p})
    q = partition.q_values
    return {
        "grad_u_l2_sq": grad_sq,
        "nu_grad_u_l2_sq": state.params.nu * grad_sq,
        "tau_l2_sq": lp_norm(state.tau, 2.0) ** 2,
        "u_besov_inf_1": weighted_sum(u_blocks[np.inf], q, 1.0, 1.0),
        "u_besov_p_high": weighted_sum(u_blocks[p], q, d / p + 1.0, 1.0),
        "_u_besov_inf_m1": weighted_sum(u_blocks[np.inf], q, -1.0, 1.0),
        "_u_besov_p": weighted_sum(u_blocks[p], q, d / p - 1.0, 1.0),
    }


def _sample(state: SimState, partition: DyadicPartition, p: float, integrand: Dict[str, float], integrals: _Integrals) -> Dict[str, float]:
    grid = state.grid
    d = grid.d
    q = partition.q_values
    tau_blocks = block_lp_norms_many(state.tau, partition, {np.inf, p})
    row = {
        "time": state.t,
        "u_l2_sq": lp_norm(state.u, 2.0) ** 2,
        "nu_grad_u_l2_sq_int": integrals.total["nu_grad_u_l2_sq"],
        "tau_l2": lp_norm(state.tau, 2.0),
        "tau_lp": lp_norm(state.tau, p),
        "u_besov_inf_m1": integrand["_u_besov_inf_m1"],
        "u_besov_inf_1_int": integrals.total["u_besov_inf_1"],
        "tau_besov_inf_0": weighted_sum(tau_blocks[np.inf], q, 0.0, 1.0),
        "tau_besov_p": weighted_sum(tau_blocks[p], q, d / p, 1.0),
        "u_weak_d": weak_lp_norm(state.u, float(d)).value,
        "tau_weak_d2": weak_lp_norm(state.tau, d / 2.0).value,
        # auxiliary, not written to CSV
        "tau_l4": lp_norm(state.tau, 4.0),
        "tau_linf": lp_norm(state.tau, np.inf),
        "u_linf": state.u.max_abs(),
        "tau_trace_mean": float(np.mean(np.trace(state.tau.values, axis1=0, axis2=1))),
        "u_besov_p": integrand["_u_besov_p"],
        "u_besov_p_high_int": integrals.total["u_besov_p_high"],
        "grad_u_l2_sq_int": integrals.total["grad_u_l2_sq"],
        "tau_l2_sq_int": integrals.total["tau_l2_sq"],
    }
    logger.debug(f"t={state.t:.6g}: |u|^2={row['u_l2_sq']:.6e}, |tau|={row['tau_l2']:.6e}")
    return row


def step_count(T: float, dt: float) -> int:
    """Steps of equal length covering [0, T] with length at most dt"""
    if T == 0.0:
        return 0
    return max(1, math.ceil(T / dt - 1e-9))


def blow_up_scale(initial: SimState) -> float:
    """Reference size for runaway detection: max(|u0|_inf, |tau0|_inf, 1)"""
    return max(initial.u.max_abs(), initial.tau.max_abs(), BLOW_UP_FLOOR)


def run(
    initial: SimState,
    settings: RunSettings,
    partition: Optional[DyadicPartition] = None,
    checkpoint_path: Optional[Path] = None,
) -> RunResult:
    """Integrate to the horizon, sampling every sample_every steps and at T.

    Raises BlowUpError carrying the last valid state and the diagnostics gathered so far
    when a step produces non-finite values, the velocity exceeds BLOW_UP_FACTOR times
    blow_up_scale, or the velocity grows past the CFL limit of the fixed step. A CFL
    violation on the first step is a StepSizeError.
    """
    partition = partition or build_partition(initial.grid)
    p = settings.p
    n_steps = step_count(settings.T, settings.dt)
    dt = settings.T / n_steps if n_steps else settings.dt
    threshold = BLOW_UP_FACTOR * blow_up_scale(initial)

    diagnostics = Diagnostics(p=p)
    invariants = InvariantLog()
    state = initial
    integrand = _integrands(state, partition, p)
    integrals = _Integrals(integrand)
    diagnostics.append(_sample(state, partition, p, integrand, integrals))
    logger.info(f"Run started: {n_steps} steps of dt={dt:.6g} to T={settings.T:g}, params={initial.params.model_dump()}")

    for n in range(1, n_steps + 1):
        previous = state
        try:
            state = step(previous, dt)
        except BlowUpError as e:
            e.diagnostics = diagnostics
            logger.error(f"Blow-up detected: {e}")
            raise
        except StepSizeError as e:
            if n == 1:
                raise
            logger.error(f"Velocity outgrew the fixed step at t={previous.t:g}: {e}")
            raise BlowUpError(
                f"CFL limit exhausted at t={previous.t:g}: {e}",
                last_state=previous,
                time=previous.t,
                diagnostics=diagnostics,
            ) from e
        # avoid accumulating round-off in t
        state = replace(state, t=initial.t + n * dt)
        if state.u.max_abs() > threshold:
            logger.error(f"Velocity exceeded {threshold:g} at t={state.t:g}")
            raise BlowUpError(
                f"velocity blow-up at t={state.t:g}", last_state=previous, time=state.t, diagnostics=diagnostics
            )
        invariants.update(state)
        integrand = _integrands(state, partition, p)
        integrals.advance(integrand, dt)
        if n % settings.sample_every == 0 or n == n_steps:
            diagnostics.append(_sample(state, partition, p, integrand, integrals))

    checkpoint = None
    if checkpoint_path is not None:
        params = state.params
        checkpoint = write_checkpoint(
            checkpoint_path,
            state.u.values,
            state.tau.values,
            state.grid.L,
            state.t,
            params.nu,
            params.a,
            params.mu,
            params.b,
        )
    logger.info(
        f"Run finished at t={state.t:g}: asymmetry {invariants.max_asymmetry:.2e}, "
        f"divergence {invariants.max_divergence:.2e}, skew residual {invariants.max_skew_residual:.2e}"
    )
    return RunResult(diagnostics, state, invariants, n_steps, dt, checkpoint)

