"""
Lorentz experiment: propagation of weak-Lebesgue smallness in three dimensions
"""

import logging
from pathlib import Path

import numpy as np

from ..config import ExperimentConfig
from ..services.bounds import (
    NORMALIZATIONS,
    lorentz_regime_tau_bound,
    lorentz_regime_u_bound,
    lorentz_regime_weak_u_bound,
    lorentz_rescaling,
    lorentz_smallness,
    measure_initial_norms,
)
from ..services.verification import make_check
from ..utils.initial_data import InitialData
from ..utils.semigroup import duhamel_lorentz_ratio
from .common import (
    ExperimentOutcome,
    build_data,
    build_grid,
    calibrated_check,
    finish,
    global_existence_check,
    invariant_checks,
    new_report,
    partition_for,
    seed_corpora,
    solve,
)

logger = logging.getLogger(__name__)

# nodes of the forcing in the Duhamel kernel check
KERNEL_NODES = 9
KERNEL_HORIZON = 0.1


def run(config: ExperimentConfig) -> ExperimentOutcome:
    output = Path(config.output.directory)
    grid = build_grid(config)
    partition = partition_for(grid)
    data = build_data(config, grid, partition)
    params = config.params
    nu = params.nu
    C = config.bounds.C
    p = config.diagnostics.p
    norms = measure_initial_norms(data.u, data.tau, partition, p)

    scale = lorentz_rescaling(norms, nu, config.epsilon)
    if scale < 1.0:
        logger.info(f"Scaling the initial data by {scale:.6g} into the Lorentz smallness regime")
        data = InitialData(data.u * scale, data.tau * scale)
        norms = measure_initial_norms(data.u, data.tau, partition, p)

    outcome = solve(config, data, output, partition)
    report = new_report(config, outcome.dt, NORMALIZATIONS)
    diagnostics = outcome.diagnostics

    premise = lorentz_smallness(norms, nu, config.epsilon)
    report.add(
        make_check(
            "lorentz_smallness_premise",
            "||u0||_{L^{d,inf}} + ||tau0||_{L^{d/2,inf}} / nu <= eps / nu",
            premise.lhs,
            premise.rhs,
            note=f"eps = {config.epsilon:g}, data scaled by {scale:.6g}",
        )
    )
    global_existence_check(report, outcome, config.time.T)
    invariant_checks(report, outcome.invariants)

    report.add(
        make_check(
            "u_weak_norm_small",
            "the Lorentz norm of u stays uniformly small: sup ||u(t)||_{L^{d,inf}} <= C (||u0|| + ||tau0|| / nu)",
            float(diagnostics.column("u_weak_d").max()),
            lorentz_regime_weak_u_bound(norms, nu, C),
            C=C,
        )
    )
    tau_weak = diagnostics.column("tau_weak_d2")
    report.add(
        make_check(
            "tau_weak_norm_nonincreasing",
            "||tau(t)||_{L^{d/2,inf}} <= ||tau0||_{L^{d/2,inf}} since |tau| is transported and damped",
            float(tau_weak.max()),
            float(tau_weak[0]),
            tolerance=config.diagnostics.weak_tolerance,
        )
    )

    times = diagnostics.times
    tau_bound = np.array([lorentz_regime_tau_bound(float(t), norms, nu, C) for t in times])
    report.add(
        make_check(
            "lorentz_regime_tau_besov",
            "||tau(t)||_{B^{d/p}_{p,1}} <= ||tau0|| exp{C t theta_nu(t)}",
            float(np.max(diagnostics.column("tau_besov_p") - tau_bound)),
            0.0,
            C=C,
            note="max over samples of measured minus bound",
        )
    )
    T = float(times[-1])
    u_lhs = float(diagnostics.column("u_besov_p").max()) + nu * float(diagnostics.column("u_besov_p_high_int")[-1])
    report.add(
        make_check(
            "lorentz_regime_u_besov",
            "||u||_{L^inf B^{d/p-1}_{p,1}} + nu ||u||_{L^1 B^{d/p+1}_{p,1}} is bounded through theta_nu",
            u_lhs,
            lorentz_regime_u_bound(T, norms, nu, C),
            C=C,
        )
    )

    kernel_times = np.linspace(0.0, KERNEL_HORIZON, KERNEL_NODES)

    def kernel_ratio(seed: int) -> float:
        forcing_tau = build_data(config, grid, partition, seed=seed).tau
        forcing = [forcing_tau * float(np.exp(-t)) for t in kernel_times]
        return duhamel_lorentz_ratio(forcing, kernel_times, nu)

    calibration, fresh = seed_corpora(config.toolbox.seed, config.toolbox.corpus)
    calibrated_check(
        report,
        "duhamel_lorentz_kernel",
        "sup_t ||int P e^{nu(t-s)Delta} div F ds||_{L^{d,inf}} <= C sup_t ||F||_{L^{d/2,inf}} when d > 2",
        kernel_ratio,
        calibration,
        fresh,
    )
    logger.info(f"Lorentz experiment finished: {len(report.failures)} of {len(report.checks)} checks failed")
    return finish(report, output, diagnostics, checkpoint=outcome.checkpoint)
