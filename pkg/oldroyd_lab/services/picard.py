"""
Picard Iteration
Local existence by alternating frozen-drift transport and linear Stokes solves
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import bisect

from ..utils.errors import DivergenceError, HorizonTooLargeError, StepSizeError
from ..utils.littlewood_paley import (
    BesovParams,
    DyadicPartition,
    block_lp_norms,
    build_partition,
    chemin_lerner_norm,
    lebesgue_besov_norm,
    trajectory_norms,
    weighted_sum,
)
from ..utils.semigroup import DuhamelTrajectory, heat_propagate, stokes_mild_solve
from ..utils.spectral import TensorField, VectorField
from .bounds import DEFAULT_C
from .oldroyd_solver import Params, nonlinear_terms

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.01
GROWTH_PATIENCE = 3
CFL_SAFETY = 0.5
PICARD_COLUMNS = ["n", "u_bar_norm", "delta_norm", "contraction_ratio"]


def linear_stokes_u_L(u0: VectorField, nu: float, times: Sequence[float]) -> DuhamelTrajectory:
    """Free Stokes evolution e^{nu (t - t0) Delta} u0 on the given nodes"""
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0):
        raise StepSizeError("Stokes nodes must be a non-empty strictly increasing sequence")
    if not u0.is_divergence_free():
        raise DivergenceError("initial velocity must be divergence-free")
    states = [heat_propagate(u0, float(t - times[0]), nu) for t in times]
    return DuhamelTrajectory(times=times, states=states)


def _check_transport_cfl(drift: Sequence[VectorField], dt: float) -> None:
    peak = max(u.max_abs() for u in drift)
    if peak == 0.0:
        return
    limit = CFL_SAFETY * drift[0].grid.spacing / peak
    if dt > limit * (1.0 + 1e-12):
        raise StepSizeError(f"transport step {dt:g} exceeds the frozen-drift CFL limit {limit:g}")


def transport_tau(
    tau0: TensorField,
    drift: Sequence[VectorField],
    times: Sequence[float],
    a: float = 0.0,
    mu: float = 0.0,
    b: float = 0.0,
    substeps: int = 1,
) -> List[TensorField]:
    """d_t tau + u.grad tau - omega tau + tau omega + b(D tau + tau D) + a tau = mu D for a frozen drift u.

    Heun steps with the integrating factor e^{-a dt}; between nodes the drift
    is interpolated linearly in time.
    """
    times = np.asarray(times, dtype=np.float64)
    if len(drift) != times.size:
        raise StepSizeError(f"drift has {len(drift)} samples for {times.size} nodes")
    if times.size > 1:
        _check_transport_cfl(drift, float(np.max(np.diff(times))) / substeps)
    grid = tau0.grid
    coefficients = Params(nu=1.0, a=a, mu=mu, b=b)

    def rate(u_hat: np.ndarray, tau_hat: np.ndarray) -> np.ndarray:
        return nonlinear_terms(grid, u_hat, tau_hat, coefficients, velocity=False)[1]

    tau_hat = tau0.symmetrized().hat
    trajectory = [TensorField.from_hat(grid, tau_hat)]
    for n in range(times.size - 1):
        start, end = drift[n].hat, drift[n + 1].hat
        h = (times[n + 1] - times[n]) / substeps
        decay = math.exp(-a * h)
        for k in range(substeps):
            lam0, lam1 = k / substeps, (k + 1) / substeps
            u_left = (1.0 - lam0) * start + lam0 * end
            u_right = (1.0 - lam1) * start + lam1 * end
            k1 = rate(u_left, tau_hat)
            predicted = decay * (tau_hat + h * k1)
            k2 = rate(u_right, predicted)
            tau_hat = decay * tau_hat + 0.5 * h * (decay * k1 + k2)
            tau_hat = 0.5 * (tau_hat + np.swapaxes(tau_hat, 0, 1))
        trajectory.append(TensorField.from_hat(grid, tau_hat))
    return trajectory


@dataclass
class PicardIterate:
    """One iterate; trajectories are kept for the latest iterate only"""

    n: int
    u_bar_norm: float
    delta_norm: float
    contraction_ratio: float
    transport_constant: float
    index_flagged: bool = False
    u_bar: Optional[List[VectorField]] = None
    tau: Optional[List[TensorField]] = None


@dataclass
class PicardResult:
    times: np.ndarray
    u_L: List[VectorField]
    iterates: List[PicardIterate] = field(default_factory=list)
    p: float = 2.0

    @property
    def last(self) -> PicardIterate:
        return self.iterates[-1]

    @property
    def u_final(self) -> VectorField:
        return self.u_L[-1] + self.last.u_bar[-1]

    @property
    def tau_final(self) -> TensorField:
        return self.last.tau[-1]

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "n": it.n,
                "u_bar_norm": it.u_bar_norm,
                "delta_norm": it.delta_norm,
                "contraction_ratio": it.contraction_ratio,
            }
            for it in self.iterates
        ]
        return pd.DataFrame(rows, columns=PICARD_COLUMNS)


def _index_flagged(d: int, p: float) -> bool:
    return not (p == d or p == d / 2.0)


def _transport_constant(tau: List[TensorField], drift: List[VectorField], times: np.ndarray, a: float, partition: DyadicPartition, p: float) -> float:
    """Smallest C with ||tau(t)||_{B^{d/p}_{p,1}} <= e^{-at} ||tau0|| exp{C int ||u||_{B^1_{inf,1}}}"""
    d = tau[0].grid.d
    q = partition.q_values
    tau_norms = np.array([weighted_sum(block_lp_norms(t, partition, p), q, d / p, 1.0) for t in tau])
    lipschitz = np.array([weighted_sum(block_lp_norms(u, partition, np.inf), q, 1.0, 1.0) for u in drift])
    cumulative = cumulative_trapezoid(lipschitz, times, initial=0.0)
    if tau_norms[0] == 0.0:
        return 0.0
    growth = np.log(np.maximum(tau_norms * np.exp(a * (times - times[0])) / tau_norms[0], 1.0))
    positive = cumulative > 0
    if not positive.any():
        return 0.0 if np.all(growth[1:] <= 1e-12) else math.inf
    return float(np.max(growth[positive] / cumulative[positive]))


def picard_solve(
    u0: VectorField,
    tau0: TensorField,
    params: Params,
    T: float,
    n_max: int,
    steps: int = 32,
    partition: Optional[DyadicPartition] = None,
    p: Optional[float] = None,
    t0: float = 0.0,
) -> PicardResult:
    """Iterates (u_bar^n, tau^n) from (0, tau0) with u^n = u_L + u_bar^n as frozen drift.

    Raises HorizonTooLargeError when delta U grows for GROWTH_PATIENCE consecutive iterates.
    """
    if T <= 0:
        raise StepSizeError(f"Picard horizon must be positive, got {T}")
    grid = u0.grid
    d = grid.d
    p = float(d) if p is None else p
    partition = partition or build_partition(grid)
    flagged = _index_flagged(d, p)
    if flagged:
        logger.warning(f"Picard difference norm with p={p} is dominated by the lowest block; only p in {{d, d/2}} is meaningful")

    times = t0 + np.linspace(0.0, T, steps + 1)
    u_L = linear_stokes_u_L(u0, params.nu, times).states
    nu = params.nu
    bar_params = BesovParams(d / p - 1.0, p, 1.0), BesovParams(d / p + 1.0, p, 1.0)
    delta_params = BesovParams(d / p - 2.0, p, 1.0), BesovParams(d / p, p, 1.0)

    u_bar = [VectorField.zeros(grid) for _ in times]
    result = PicardResult(times=times, u_L=u_L, p=p)
    previous_delta = math.nan
    growth_run = 0
    logger.info(f"Picard iteration on [{times[0]:g}, {times[-1]:g}] with {steps} steps, n_max={n_max}, p={p:g}")

    for n in range(1, n_max + 1):
        drift = [ul + ub for ul, ub in zip(u_L, u_bar)]
        tau = transport_tau(tau0, drift, times, a=params.a, mu=params.mu, b=params.b)
        forcing = [
            VectorField.from_hat(grid, nonlinear_terms(grid, u.hat, t.hat, params)[0])
            for u, t in zip(drift, tau)
        ]
        new_bar = stokes_mild_solve(VectorField.zeros(grid), forcing, nu, times).states

        bar_traj = trajectory_norms(new_bar, times, partition, p)
        u_bar_norm = lebesgue_besov_norm(bar_traj, np.inf, bar_params[0]) + nu * lebesgue_besov_norm(
            bar_traj, 1.0, bar_params[1]
        )
        delta = [new - old for new, old in zip(new_bar, u_bar)]
        delta_traj = trajectory_norms(delta, times, partition, p)
        delta_norm = chemin_lerner_norm(delta_traj, np.inf, delta_params[0]) + nu * chemin_lerner_norm(
            delta_traj, 1.0, delta_params[1]
        )
        if math.isnan(previous_delta):
            ratio = math.nan
        elif previous_delta == 0.0:
            ratio = 0.0
        else:
            ratio = delta_norm / previous_delta

        iterate = PicardIterate(
            n=n,
            u_bar_norm=u_bar_norm,
            delta_norm=delta_norm,
            contraction_ratio=ratio,
            transport_constant=_transport_constant(tau, drift, times, params.a, partition, p),
            index_flagged=flagged,
            u_bar=new_bar,
            tau=tau,
        )
        if result.iterates:
            result.iterates[-1].u_bar = None
            result.iterates[-1].tau = None
        result.iterates.append(iterate)
        logger.debug(f"Picard n={n}: U_bar={u_bar_norm:.4e}, delta={delta_norm:.4e}, ratio={ratio:.4f}")

        growth_run = growth_run + 1 if ratio > 1.0 else 0
        if growth_run >= GROWTH_PATIENCE:
            logger.error(f"Picard iterates diverge at n={n}: delta U grew {GROWTH_PATIENCE} times in a row")
            raise HorizonTooLargeError(f"Picard iterates diverge on [0, {T:g}]; shrink the horizon")
        previous_delta = delta_norm
        u_bar = new_bar
    return result


def _horizon_excess(
    u0: VectorField,
    tau0: TensorField,
    params: Params,
    partition: DyadicPartition,
    p: float,
    epsilon: float,
    C: float,
    t_cap: float,
    samples: int,
):
    d = u0.grid.d
    q = partition.q_values
    nodes = np.linspace(0.0, t_cap, samples + 1)
    besov_sq = np.array(
        [weighted_sum(block_lp_norms(heat_propagate(u0, float(t), params.nu), partition, p), q, d / p, 1.0) ** 2 for t in nodes]
    )
    linear_part = cumulative_trapezoid(besov_sq, nodes, initial=0.0)
    tau_norm = weighted_sum(block_lp_norms(tau0, partition, p), q, d / p, 1.0)
    target = params.nu * epsilon / (100.0 * C)

    def excess(T: float) -> float:
        return C * float(np.interp(T, nodes, linear_part)) + C * T * tau_norm * math.exp(params.nu / 2.0) - target

    return excess


def smallness_horizon(
    u0: VectorField,
    tau0: TensorField,
    params: Params,
    t_cap: float,
    dt: float,
    partition: Optional[DyadicPartition] = None,
    p: Optional[float] = None,
    epsilon: float = DEFAULT_EPSILON,
    C: float = DEFAULT_C,
    samples: int = 256,
) -> float:
    """Largest T <= t_cap with C ||u_L||^2_{L^2 B^{d/p}_{p,1}} + C T ||tau0||_{B^{d/p}_{p,1}} e^{nu/2} <= nu eps / (100 C)"""
    partition = partition or build_partition(u0.grid)
    p = float(u0.grid.d) if p is None else p
    excess = _horizon_excess(u0, tau0, params, partition, p, epsilon, C, t_cap, samples)
    if excess(t_cap) <= 0.0:
        return t_cap
    if excess(dt) > 0.0:
        raise HorizonTooLargeError(f"no admissible Picard horizon above dt={dt:g} for eps={epsilon:g}")
    return float(bisect(excess, dt, t_cap, xtol=1e-12 * t_cap, rtol=1e-10))


def picard_restart(first: PicardResult, params: Params, n_max: int, partition: Optional[DyadicPartition] = None) -> PicardResult:
    """A second solve on [T, 2T] started from the first fixed point"""
    times = first.times
    T = float(times[-1] - times[0])
    steps = times.size - 1
    logger.info(f"Restarting Picard iteration at t={times[-1]:g}")
    return picard_solve(
        first.u_final,
        first.tau_final,
        params,
        T,
        n_max,
        steps=steps,
        partition=partition,
        p=first.p,
        t0=float(times[-1]),
    )
