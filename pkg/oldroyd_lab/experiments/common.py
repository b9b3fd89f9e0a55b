"""
Shared experiment plumbing: grids, initial data, time steps and artifact emission
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import ExperimentConfig
from ..services.oldroyd_solver import Diagnostics, InvariantLog, RunResult, RunSettings, SimState, initial_state, run
from ..services.verification import CheckRecord, VerificationReport, emit_report, make_check, write_csv
from ..utils.calibration import calibrate_constant
from ..utils.errors import BlowUpError
from ..utils.initial_data import InitialData, cfl_time_step, generate
from ..utils.littlewood_paley import DyadicPartition, build_partition
from ..utils.spectral import Grid, make_grid

logger = logging.getLogger(__name__)

MAX_DEFAULT_DT = 1e-2
# fraction of the CFL limit used when time.dt is unset
DEFAULT_CFL_FRACTION = 0.8
INVARIANT_TOLERANCE = 1e-10


@dataclass
class ExperimentOutcome:
    report: VerificationReport
    artifacts: List[Path] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.report.passed


def build_grid(config: ExperimentConfig) -> Grid:
    return make_grid(config.grid.d, config.grid.N, config.grid.L)


def build_data(config: ExperimentConfig, grid: Grid, partition: DyadicPartition, seed: Optional[int] = None) -> InitialData:
    data = config.initial_data
    return generate(
        data.generator,
        grid,
        seed=data.seed if seed is None else seed,
        amplitude=data.amplitude,
        tau_amplitude=data.tau_amplitude,
        q0=data.q0,
        q1=data.q1,
        partition=partition,
    )


def resolve_dt(config: ExperimentConfig, state: SimState) -> float:
    """Configured dt, or a fraction of the CFL limit of the initial velocity"""
    if config.time.dt is not None:
        return config.time.dt
    limit = cfl_time_step(state.u)
    return min(MAX_DEFAULT_DT, DEFAULT_CFL_FRACTION * limit)


def environment(config: ExperimentConfig, dt: Optional[float]) -> Dict[str, object]:
    return {
        "d": config.grid.d,
        "N": config.grid.N,
        "L": config.grid.L,
        "seed": config.initial_data.seed,
        "dt": dt,
        "T": config.time.T,
        "threads_independent": True,
    }


def new_report(config: ExperimentConfig, dt: Optional[float] = None, normalizations: Sequence[str] = ()) -> VerificationReport:
    return VerificationReport(
        experiment=config.experiment,
        environment=environment(config, dt),
        normalizations=list(normalizations),
    )


@dataclass
class SolverRun:
    """Outcome of a solver run that may have stopped early"""

    initial: SimState
    diagnostics: Diagnostics
    final_state: SimState
    invariants: Optional[InvariantLog]
    dt: float
    blow_up_time: Optional[float] = None
    checkpoint: Optional[Path] = None

    @property
    def completed(self) -> bool:
        return self.blow_up_time is None


def solve(
    config: ExperimentConfig,
    data: InitialData,
    output: Path,
    partition: DyadicPartition,
    keep_checkpoint: bool = True,
) -> SolverRun:
    """Run the solver; a blow-up is returned as data rather than raised.

    Corpus runs pass keep_checkpoint=False so that only the primary run writes checkpoint.bin.
    """
    state = initial_state(data.u, data.tau, config.params)
    dt = resolve_dt(config, state)
    settings = RunSettings(dt=dt, T=config.time.T, sample_every=config.time.sample_every, p=config.diagnostics.p)
    checkpoint = output / "checkpoint.bin" if config.output.checkpoint and keep_checkpoint else None
    try:
        result: RunResult = run(state, settings, partition=partition, checkpoint_path=checkpoint)
    except BlowUpError as e:
        last = e.last_state if e.last_state is not None else state
        diagnostics = e.diagnostics if e.diagnostics is not None else Diagnostics(p=settings.p)
        return SolverRun(state, diagnostics, last, None, dt, blow_up_time=e.time)
    return SolverRun(state, result.diagnostics, result.final_state, result.invariants, result.dt, checkpoint=result.checkpoint)


def global_existence_check(report: VerificationReport, outcome: SolverRun, T: float) -> None:
    reached = T if outcome.completed else outcome.blow_up_time
    report.add(
        make_check(
            "global_existence",
            "classical solutions exist on the whole run horizon",
            reached,
            T,
            relation="ge",
            note="" if outcome.completed else f"blow-up detected at t={outcome.blow_up_time:g}",
        )
    )


def invariant_checks(report: VerificationReport, invariants: Optional[InvariantLog]) -> None:
    if invariants is None:
        return
    report.add(
        make_check(
            "tau_symmetry",
            "the stress stays symmetric at every step",
            invariants.max_asymmetry,
            INVARIANT_TOLERANCE,
        )
    )
    report.add(
        make_check(
            "u_divergence",
            "the velocity stays divergence-free at every step",
            invariants.max_divergence,
            INVARIANT_TOLERANCE,
        )
    )
    report.add(
        make_check(
            "skew_cancellation",
            "<omega tau - tau omega, tau> vanishes for symmetric tau",
            invariants.max_skew_residual,
            INVARIANT_TOLERANCE,
        )
    )


def calibrated_check(
    report: VerificationReport,
    name: str,
    anchor: str,
    ratio: Callable[[int], float],
    calibration_seeds: Sequence[int],
    test_seeds: Sequence[int],
    label: str = "seeds",
    display: Optional[Sequence[object]] = None,
) -> CheckRecord:
    """Calibrate C on one corpus, then assert the ratio stays below C on a fresh one.

    display maps corpus indices to the values named in the note.
    """
    constant = calibrate_constant([ratio(seed) for seed in calibration_seeds], family=name)
    worst = max(ratio(seed) for seed in test_seeds)

    def shown(indices: Sequence[int]) -> list:
        return [display[i] for i in indices] if display is not None else list(indices)

    return report.add(
        make_check(
            name,
            anchor,
            worst,
            constant.value,
            C=constant.value,
            note=f"C calibrated on {label} {shown(calibration_seeds)}, asserted on {shown(test_seeds)}",
        )
    )


def seed_corpora(base_seed: int, size: int) -> Tuple[List[int], List[int]]:
    """A calibration corpus and a disjoint fresh corpus of the same size"""
    calibration = list(range(base_seed, base_seed + size))
    fresh = list(range(base_seed + size, base_seed + 2 * size))
    return calibration, fresh


def finish(
    report: VerificationReport,
    output: Path,
    diagnostics: Optional[Diagnostics] = None,
    frames: Optional[Dict[str, object]] = None,
    checkpoint: Optional[Path] = None,
) -> ExperimentOutcome:
    """Write diagnostics.csv, extra frames and verification.json"""
    artifacts: List[Path] = []
    if diagnostics is not None:
        artifacts.append(write_csv(diagnostics.to_frame(), output / "diagnostics.csv"))
    for name, frame in (frames or {}).items():
        artifacts.append(write_csv(frame, output / name))
    if checkpoint is not None:
        artifacts.append(checkpoint)
    artifacts.append(emit_report(report, output / "verification.json"))
    return ExperimentOutcome(report, artifacts)


def max_ratio(numerator: np.ndarray, denominator: np.ndarray) -> float:
    denominator = np.asarray(denominator, dtype=np.float64)
    numerator = np.asarray(numerator, dtype=np.float64)
    safe = denominator > 0
    if not safe.any():
        return 0.0 if np.all(numerator <= 0) else math.inf
    return float(np.max(numerator[safe] / denominator[safe]))


def partition_for(grid: Grid) -> DyadicPartition:
    return build_partition(grid)
