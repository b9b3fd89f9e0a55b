"""
Picard experiment: contraction of the local-existence iteration and agreement with the direct solver
"""

import logging
import math
from pathlib import Path
from typing import List, Optional

from ..config import ExperimentConfig
from ..services.oldroyd_solver import RunSettings, initial_state, run as run_solver
from ..services.picard import PicardResult, picard_restart, picard_solve, smallness_horizon
from ..services.verification import VerificationReport, make_check
from ..utils.errors import HorizonTooLargeError
from ..utils.spectral import lp_norm
from .common import ExperimentOutcome, build_data, build_grid, finish, new_report, partition_for

logger = logging.getLogger(__name__)

CONTRACTION_FACTOR = 0.5
CONTRACTION_SLACK = 0.05
# ratios whose denominator sits this far below the first difference are round-off
ROUNDOFF_FLOOR = 1e-12
# lower end of the horizon bisection when time.dt is unset
HORIZON_FLOOR = 1e-12


def contraction_ratios(result: PicardResult) -> List[float]:
    """Ratios delta^{n} / delta^{n-1} for n >= 3, skipping round-off-level denominators"""
    deltas = [it.delta_norm for it in result.iterates]
    if not deltas:
        return []
    scale = max(deltas)
    ratios = []
    for it, previous in zip(result.iterates[2:], deltas[1:]):
        if previous <= ROUNDOFF_FLOOR * scale:
            break
        ratios.append(it.contraction_ratio)
    return ratios


def _contraction_check(report: VerificationReport, name: str, ratios: List[float], note: str) -> None:
    worst = max(ratios) if ratios else 0.0
    report.add(
        make_check(
            name,
            "delta U^{n+1} <= delta U^n / 2 once the iterates enter the contraction regime",
            worst,
            CONTRACTION_FACTOR,
            tolerance=CONTRACTION_SLACK / CONTRACTION_FACTOR,
            note=note,
        )
    )


def run(config: ExperimentConfig) -> ExperimentOutcome:
    output = Path(config.output.directory)
    grid = build_grid(config)
    partition = partition_for(grid)
    params = config.params
    settings = config.picard
    p = config.diagnostics.p
    base_seed = config.initial_data.seed
    report = new_report(config, config.time.dt)

    ratios: List[float] = []
    transport_constants: List[float] = []
    failures: List[str] = []
    first: Optional[PicardResult] = None
    first_data = None
    first_seed = base_seed
    horizons = []
    for seed in range(base_seed, base_seed + settings.corpus):
        data = build_data(config, grid, partition, seed=seed)
        try:
            if settings.horizon is not None:
                T = settings.horizon
            else:
                T = smallness_horizon(
                    data.u,
                    data.tau,
                    params,
                    t_cap=config.time.T,
                    dt=config.time.dt or HORIZON_FLOOR,
                    partition=partition,
                    p=p,
                    epsilon=config.epsilon,
                    C=config.bounds.C,
                )
            result = picard_solve(data.u, data.tau, params, T, settings.n_max, steps=settings.steps, partition=partition, p=p)
        except HorizonTooLargeError as e:
            logger.warning(f"Picard seed {seed} failed: {e}")
            failures.append(f"seed {seed}: {e}")
            continue
        horizons.append(T)
        ratios.extend(contraction_ratios(result))
        transport_constants.extend(it.transport_constant for it in result.iterates)
        if first is None:
            first, first_data, first_seed = result, data, seed

    report.add(
        make_check(
            "picard_horizon",
            "an admissible horizon exists and the iterates stay bounded for every seeded datum",
            float(len(failures)),
            0.0,
            note="; ".join(failures) or f"horizons {[f'{T:.3e}' for T in horizons]}",
        )
    )
    _contraction_check(report, "picard_contraction", ratios, f"worst ratio over {settings.corpus} seeds, n >= 3")
    report.add(
        make_check(
            "transport_exponential_bound",
            "||tau^n(t)||_{B^{d/p}_{p,1}} <= e^{-at} ||tau0|| exp{C int ||u^n||_{B^1_{inf,1}}}",
            max(transport_constants, default=0.0),
            config.bounds.C,
            C=config.bounds.C,
            note="smallest admissible C over all iterates and seeds",
        )
    )

    frames = {}
    if first is not None:
        frames["picard.csv"] = first.to_frame()
        times = first.times
        T = float(times[-1] - times[0])
        dt = T / settings.steps
        state = initial_state(first_data.u, first_data.tau, params)
        direct = run_solver(state, RunSettings(dt=dt, T=T, sample_every=settings.steps, p=p), partition=partition)
        gap = lp_norm(first.u_final - direct.final_state.u, 2.0)
        report.add(
            make_check(
                "picard_direct_agreement",
                "the Picard fixed point and the direct solver agree to O(dt^2 + delta U^{n_max})",
                gap,
                10.0 * (dt ** 2 + first.last.delta_norm),
                note=f"seed {first_seed}, horizon {T:.3e}",
            )
        )
        try:
            restart = picard_restart(first, params, settings.n_max, partition)
            _contraction_check(report, "picard_restart_contraction", contraction_ratios(restart), "second solve on [T, 2T]")
        except HorizonTooLargeError as e:
            logger.warning(f"Picard restart failed: {e}")
            report.add(
                make_check(
                    "picard_restart_contraction",
                    "delta U^{n+1} <= delta U^n / 2 once the iterates enter the contraction regime",
                    math.inf,
                    CONTRACTION_FACTOR,
                    note=str(e),
                )
            )
        if first.last.index_flagged:
            report.normalizations.append(f"difference norm index d/p - 2 = {grid.d / p - 2:g} is flagged")
    logger.info(f"Picard experiment finished: {len(report.failures)} of {len(report.checks)} checks failed")
    return finish(report, output, frames=frames)
