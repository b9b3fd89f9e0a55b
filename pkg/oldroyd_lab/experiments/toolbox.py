"""
Toolbox experiment: the functional-analytic identities and inequalities behind the estimates,
checked on seeded band-limited fields
"""

import logging
from pathlib import Path
from typing import List

import numpy as np
import pandas as pd

from ..config import ExperimentConfig
from ..services.verification import VerificationReport, make_check
from ..utils.initial_data import random_band_scalar, single_block
from ..utils.littlewood_paley import (
    BesovParams,
    DyadicPartition,
    besov_norm,
    block_lp_norms,
    bony_decompose,
    chemin_lerner_norm,
    check_bernstein,
    dyadic_block,
    lebesgue_besov_norm,
    log_interpolation_check,
    trajectory_norms,
    weighted_sum,
)
from ..utils.lorentz import besov_embedding_ratio, lorentz_split, weak_lp_norm
from ..utils.semigroup import (
    default_test_fields,
    fit_block_decay,
    heat_propagate,
    stokes_chemin_lerner_ratio,
    stokes_mild_solve,
    verify_grad_kernel_bound,
)
from ..utils.spectral import Field, Grid, VectorField, gradient, leray_project, lp_norm, make_grid
from .common import ExperimentOutcome, build_grid, calibrated_check, finish, new_report, partition_for, seed_corpora

logger = logging.getLogger(__name__)

EXACT_TOLERANCE = 1e-12
# (3/4)^2 with a 10% margin
BLOCK_DECAY_FLOOR = 0.9 * 9.0 / 16.0
BESOV_INDEX = 0.5
SPLIT_LEVELS = (0.1, 1.0, 10.0)
WEAK_EXPONENT = 2.0
SCALING_FACTOR = -3.5
# 1 / sqrt(2e): sup over |xi| of |xi| exp(-tau |xi|^2), times sqrt(tau)
L2_KERNEL_CONSTANT = 1.0 / np.sqrt(2.0 * np.e)
KERNEL_COLUMNS = ["N", "p", "q", "tau", "scaled_norm"]


def _band(partition: DyadicPartition):
    return partition.q_min + 1, partition.q_max - 1


def octave_dilation(f: Field) -> Field:
    """g(x) = f(2x) on the torus, by sampling every other grid point twice over"""
    N = f.grid.N
    index = (2 * np.arange(N)) % N
    values = f.values
    for axis in range(f.grid.d):
        values = np.take(values, index, axis=axis)
    return Field(f.grid, values)


def _spectral_structure(report: VerificationReport, grid: Grid, partition: DyadicPartition, seed: int) -> None:
    covered = partition.covered_mask()
    report.add(
        make_check(
            "partition_of_unity",
            "the annulus bumps sum to one on the covered shell",
            float(np.max(np.abs(partition.partition_sum()[covered] - 1.0))),
            EXACT_TOLERANCE,
        )
    )
    q = partition.q_max - 1
    f = single_block(grid, q, seed)
    report.add(
        make_check(
            "single_block_identity",
            "a field supported where phi(2^-q xi) = 1 is its own q-th block",
            lp_norm(dyadic_block(f, q, partition) - f, np.inf) / lp_norm(f, np.inf),
            EXACT_TOLERANCE,
            note=f"block {q}",
        )
    )
    low, high = _band(partition)
    g = random_band_scalar(grid, seed, low, high, partition)
    overlaps = [
        lp_norm(dyadic_block(dyadic_block(g, j, partition), j + 2, partition), np.inf)
        for j in range(partition.q_min, partition.q_max - 1)
    ]
    report.add(
        make_check(
            "block_orthogonality",
            "Delta_q Delta_j = 0 whenever |q - j| >= 2",
            max(overlaps) / lp_norm(g, np.inf),
            EXACT_TOLERANCE,
        )
    )


def _besov_identities(report: VerificationReport, grid: Grid, partition: DyadicPartition, seed: int) -> None:
    q = partition.q_max - 1
    f = single_block(grid, q, seed)
    params = BesovParams(BESOV_INDEX, 2.0, 1.0)
    report.add(
        make_check(
            "octave_scaling",
            "moving a spectrum up one octave multiplies the B^s_{p,r} norm by 2^s",
            besov_norm(octave_dilation(f), params, partition) / besov_norm(f, params, partition),
            2.0 ** BESOV_INDEX,
            relation="eq_rel",
            tolerance=1e-6,
        )
    )

    low, high = _band(partition)
    g = random_band_scalar(grid, seed, low, high, partition)
    h = random_band_scalar(grid, seed + 1, low, high, partition)
    parts = bony_decompose(g, h, partition)
    product = g * h
    rebuilt = parts.paraproduct_fg + parts.paraproduct_gf + parts.remainder
    report.add(
        make_check(
            "bony_reconstruction",
            "fg = T_f g + T_g f + R(f, g)",
            lp_norm(product - rebuilt, np.inf) / lp_norm(product, np.inf),
            EXACT_TOLERANCE,
        )
    )

    times = np.linspace(0.0, 0.5, 11)
    trajectory = trajectory_norms([heat_propagate(g, float(t), 1.0) for t in times], times, partition, 2.0)
    report.add(
        make_check(
            "chemin_lerner_dominates_lebesgue",
            "||f||_{L^inf_T B^s_{p,1}} <= ||f||_{L~^inf_T B^s_{p,1}} since the time sup moves inside the block sum",
            chemin_lerner_norm(trajectory, np.inf, params),
            lebesgue_besov_norm(trajectory, np.inf, params),
            relation="ge",
        )
    )
    report.add(
        make_check(
            "chemin_lerner_equals_lebesgue_l1",
            "the Chemin-Lerner and Lebesgue-Besov norms coincide when rho = r = 1",
            chemin_lerner_norm(trajectory, 1.0, params),
            lebesgue_besov_norm(trajectory, 1.0, params),
            relation="eq_rel",
            tolerance=EXACT_TOLERANCE,
        )
    )


def _calibrated_inequalities(
    report: VerificationReport, grid: Grid, partition: DyadicPartition, calibration: List[int], fresh: List[int]
) -> None:
    low, high = _band(partition)
    fields = {}

    def field(seed: int) -> Field:
        if seed not in fields:
            fields[seed] = random_band_scalar(grid, seed, low, high, partition)
        return fields[seed]

    blocks = range(low, high + 1)

    def bernstein_lebesgue(seed: int) -> float:
        return max(check_bernstein(field(seed), q, 2.0, np.inf, partition).lebesgue_ratio for q in blocks)

    calibrated_check(
        report,
        "bernstein_lebesgue",
        "||Delta_q f||_{L^inf} <= C 2^{q d/2} ||Delta_q f||_{L^2}",
        bernstein_lebesgue,
        calibration,
        fresh,
    )

    gradient_ratios = [check_bernstein(field(seed), q, 2.0, 2.0, partition).gradient_ratio for seed in fresh for q in blocks]
    report.add(
        make_check(
            "bernstein_gradient_upper",
            "||grad Delta_q f||_{L^2} <= 8/3 2^q ||Delta_q f||_{L^2}",
            max(gradient_ratios),
            8.0 / 3.0,
        )
    )
    report.add(
        make_check(
            "bernstein_gradient_lower",
            "||grad Delta_q f||_{L^2} >= 3/4 2^q ||Delta_q f||_{L^2}",
            min(gradient_ratios),
            0.75,
            relation="ge",
        )
    )

    q_values = partition.q_values

    def equivalence(seed: int) -> float:
        f = field(seed)
        grad = weighted_sum(block_lp_norms(gradient(f), partition, 2.0), q_values, BESOV_INDEX - 1.0, 1.0)
        return grad / weighted_sum(block_lp_norms(f, partition, 2.0), q_values, BESOV_INDEX, 1.0)

    calibrated_check(
        report,
        "norm_equivalence_upper",
        "||grad u||_{B^{s-1}_{p,r}} <= C ||u||_{B^s_{p,r}}",
        equivalence,
        calibration,
        fresh,
    )
    calibrated_check(
        report,
        "norm_equivalence_lower",
        "||u||_{B^s_{p,r}} <= C ||grad u||_{B^{s-1}_{p,r}}",
        lambda seed: 1.0 / equivalence(seed),
        calibration,
        fresh,
    )

    def log_ratio(seed: int) -> float:
        f = field(seed)
        lhs = -log_interpolation_check(f, partition, C=0.0)
        leading = log_interpolation_check(f, partition, C=1.0) + lhs
        return lhs / leading

    calibrated_check(
        report,
        "log_interpolation",
        "||f||_{B^{1/2}_{4,1}} <= C ||f||_{B^{1/2}_{4,inf}} log(e + (||f||_{B^{-1/2}} + ||f||_{B^{3/2}}) / ||f||_{B^{1/2}_{4,inf}})",
        log_ratio,
        calibration,
        fresh,
    )
    calibrated_check(
        report,
        "weak_lebesgue_embedding",
        "sup_q 2^{q(d/4 - d/2)} ||Delta_q f||_{L^4} <= C ||f||_{L^{2,inf}}",
        lambda seed: besov_embedding_ratio(field(seed), 2.0, 4.0, partition),
        calibration,
        fresh,
    )

    if grid.d != 2:
        return
    square_band = (low, partition.q_max - 2)

    def square_ratio(seed: int) -> float:
        f = random_band_scalar(grid, seed, *square_band, partition)
        # f^2 has a mean, so its blocks are summed directly
        lhs = weighted_sum(block_lp_norms(f * f, partition, np.inf), q_values, 0.0, 1.0)
        rhs = lp_norm(f, 2.0) * weighted_sum(block_lp_norms(f, partition, np.inf), q_values, 1.0, 1.0)
        return lhs / rhs

    calibrated_check(
        report,
        "square_in_besov",
        "||f^2||_{B^0_{inf,1}} <= C ||f||_{L^2} ||f||_{B^1_{inf,1}} in two dimensions",
        square_ratio,
        calibration,
        fresh,
    )


def _weak_norm_properties(report: VerificationReport, grid: Grid, partition: DyadicPartition, seeds: List[int]) -> None:
    low, high = _band(partition)
    fields = [random_band_scalar(grid, seed, low, high, partition) for seed in seeds]
    weak = [weak_lp_norm(f, WEAK_EXPONENT).value for f in fields]
    report.add(
        make_check(
            "weak_norm_chebyshev",
            "||f||_{L^{p,inf}} <= ||f||_{L^p}",
            max(w / lp_norm(f, WEAK_EXPONENT) for w, f in zip(weak, fields)),
            1.0,
        )
    )
    scaled = weak_lp_norm(fields[0] * SCALING_FACTOR, WEAK_EXPONENT).value
    report.add(
        make_check(
            "weak_norm_scaling",
            "||c f||_{L^{p,inf}} = |c| ||f||_{L^{p,inf}}",
            scaled,
            abs(SCALING_FACTOR) * weak[0],
            relation="eq_rel",
            tolerance=EXACT_TOLERANCE,
        )
    )
    pairs = list(zip(range(len(fields)), range(1, len(fields))))
    if pairs:
        worst = max(
            weak_lp_norm(fields[i] + fields[j], WEAK_EXPONENT).value / (2.0 * (weak[i] + weak[j])) for i, j in pairs
        )
        report.add(
            make_check(
                "weak_norm_quasi_triangle",
                "||f + g||_{L^{p,inf}} <= 2 (||f||_{L^{p,inf}} + ||g||_{L^{p,inf}})",
                worst,
                1.0,
            )
        )
    ratios = []
    for f in fields:
        for A in SPLIT_LEVELS:
            split = lorentz_split(f, A, WEAK_EXPONENT)
            ratios.append(max(split.l1_ratio, split.linf_ratio))
    report.add(
        make_check(
            "lorentz_split",
            "f = f_A + f^A with ||f_A||_{L^1} <= C A^{1-1/p} and ||f^A||_{L^inf} <= C A^{-1/p}",
            max(ratios),
            1.0,
            note=f"A in {list(SPLIT_LEVELS)}",
        )
    )


def _heat_checks(report: VerificationReport, grid: Grid, partition: DyadicPartition, nu: float, seed: int) -> None:
    low, high = _band(partition)
    f = random_band_scalar(grid, seed, low, high, partition)
    rates = []
    for q in range(low, high + 1):
        times = np.linspace(0.0, 1.0 / (nu * 4.0 ** q), 9)
        rates.append(fit_block_decay(f, q, partition, nu, times, p=2.0).c)
    report.add(
        make_check(
            "heat_block_decay",
            "||e^{nu t Delta} Delta_q f||_{L^p} <= C e^{-c nu t 4^q} ||Delta_q f||_{L^p}",
            min(rates),
            BLOCK_DECAY_FLOOR,
            relation="ge",
            note="smallest fitted rate over the blocks",
        )
    )
    t = 0.05
    gaps = [
        lp_norm(heat_propagate(dyadic_block(f, q, partition), t, nu) - dyadic_block(heat_propagate(f, t, nu), q, partition), np.inf)
        for q in partition.q_values
    ]
    report.add(
        make_check(
            "heat_block_commutation",
            "e^{nu t Delta} and Delta_q commute",
            max(gaps) / lp_norm(f, np.inf),
            1e-13,
        )
    )

    velocity = VectorField.from_components([random_band_scalar(grid, seed + k, low, high, partition) for k in range(grid.d)])
    u0 = leray_project(velocity)
    source = leray_project(
        VectorField.from_components([random_band_scalar(grid, seed + grid.d + k, low, high, partition) for k in range(grid.d)])
    )
    times = np.linspace(0.0, 0.1, 33)
    trajectory = stokes_mild_solve(u0, [source * float(np.cos(8.0 * s)) for s in times], nu, times)
    report.add(
        make_check(
            "stokes_chemin_lerner",
            "||u||_{L~^inf B^s_{p,1}} <= ||u0||_{B^s_{p,1}} + ||P g||_{L~^1 B^s_{p,1}}",
            stokes_chemin_lerner_ratio(trajectory, partition, nu, 0.0, 2.0, 1.0, np.inf, 1.0),
            1.0,
        )
    )


def _kernel_checks(report: VerificationReport, seed: int) -> pd.DataFrame:
    rows = []
    grid = make_grid(2, 64)
    taus = np.geomspace(2e-3, 2e-2, 5)
    fit = verify_grad_kernel_bound(grid, 2.0, 2.0, taus, default_test_fields(grid, 2.0, seed))
    rows.extend({"N": 64, "p": 2.0, "q": 2.0, "tau": t, "scaled_norm": s} for t, s in zip(taus, fit.scaled_norms))
    report.add(
        make_check(
            "grad_kernel_l2",
            "sqrt(tau) ||e^{tau Delta} grad||_{L^2 -> L^2} = 1 / sqrt(2e)",
            fit.constant,
            L2_KERNEL_CONSTANT,
            relation="eq_rel",
            tolerance=0.05,
        )
    )

    grid = make_grid(2, 128)
    taus = np.geomspace(0.02, 0.2, 5)
    fit = verify_grad_kernel_bound(grid, 1.0, np.inf, taus)
    rows.extend({"N": 128, "p": 1.0, "q": np.inf, "tau": t, "scaled_norm": s} for t, s in zip(taus, fit.scaled_norms))
    centre = float(fit.scaled_norms.mean())
    report.add(
        make_check(
            "grad_kernel_l1_linf",
            "tau^{3/2} ||e^{tau Delta} grad||_{L^1 -> L^inf} is stable over a decade of tau in two dimensions",
            float(np.max(np.abs(fit.scaled_norms - centre)) / centre),
            0.2,
            note=f"constant {fit.constant:.6g}",
        )
    )
    return pd.DataFrame(rows, columns=KERNEL_COLUMNS)


def run(config: ExperimentConfig) -> ExperimentOutcome:
    output = Path(config.output.directory)
    grid = build_grid(config)
    partition = partition_for(grid)
    seed = config.initial_data.seed
    report = new_report(config)
    calibration, fresh = seed_corpora(config.toolbox.seed, config.toolbox.corpus)
    logger.info(f"Toolbox checks on d={grid.d}, N={grid.N}, blocks [{partition.q_min}, {partition.q_max}]")

    _spectral_structure(report, grid, partition, seed)
    _besov_identities(report, grid, partition, seed)
    _calibrated_inequalities(report, grid, partition, calibration, fresh)
    _weak_norm_properties(report, grid, partition, fresh)
    _heat_checks(report, grid, partition, config.params.nu, seed)
    kernel = _kernel_checks(report, seed)

    logger.info(f"Toolbox experiment finished: {len(report.failures)} of {len(report.checks)} checks failed")
    return finish(report, output, frames={"kernel.csv": kernel})
