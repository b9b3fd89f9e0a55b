"""
Decay experiment: exponential damping of the stress in every L^p and the energy inequality
"""

import logging
from pathlib import Path

import numpy as np

from ..config import ExperimentConfig
from ..services.bounds import gamma
from ..services.verification import make_check
from .common import (
    ExperimentOutcome,
    build_data,
    build_grid,
    finish,
    global_existence_check,
    invariant_checks,
    max_ratio,
    new_report,
    partition_for,
    solve,
)

logger = logging.getLogger(__name__)

# Lebesgue exponent -> (diagnostic column, relative tolerance)
LP_TOLERANCES = {
    2.0: ("tau_l2", 1e-6),
    4.0: ("tau_l4", 1e-3),
    np.inf: ("tau_linf", 5e-2),
}
ENERGY_SLACK = 0.01


def run(config: ExperimentConfig) -> ExperimentOutcome:
    output = Path(config.output.directory)
    grid = build_grid(config)
    partition = partition_for(grid)
    data = build_data(config, grid, partition)
    outcome = solve(config, data, output, partition)
    report = new_report(config, outcome.dt)
    params = config.params
    diagnostics = outcome.diagnostics

    global_existence_check(report, outcome, config.time.T)
    invariant_checks(report, outcome.invariants)

    times = diagnostics.times
    damping = np.exp(-params.a * times)
    for p, (column, tolerance) in LP_TOLERANCES.items():
        values = diagnostics.column(column)
        if values[0] == 0.0:
            continue
        deviation = np.abs(values / (values[0] * damping) - 1.0)
        label = "inf" if np.isinf(p) else f"{p:g}"
        report.add(
            make_check(
                f"tau_l{label}_decay",
                f"||tau(t)||_{{L^{label}}} = e^{{-at}} ||tau0||_{{L^{label}}} when mu = 0 and b = 0",
                float(deviation.max()),
                tolerance,
                note=f"max relative deviation over {times.size} samples",
            )
        )

    if len(diagnostics) > 0 and diagnostics.column("tau_l2")[0] > 0.0:
        final = diagnostics.column("tau_l2")[-1] / diagnostics.column("tau_l2")[0]
        report.add(
            make_check(
                "tau_l2_final_ratio",
                "||tau(T)||_{L^2} / ||tau0||_{L^2} = e^{-aT}",
                final,
                float(np.exp(-params.a * times[-1])),
                relation="eq_rel",
                tolerance=1e-6,
            )
        )

    trace = diagnostics.column("tau_trace_mean")
    trace_scale = max(abs(trace[0]), 1.0)
    report.add(
        make_check(
            "tau_trace_mean_decay",
            "the commutator is trace-free so the mean trace decays like e^{-at}",
            float(np.max(np.abs(trace - trace[0] * damping)) / trace_scale),
            1e-8,
        )
    )

    u0_sq = diagnostics.column("u_l2_sq")[0]
    tau0_sq = diagnostics.column("tau_l2")[0] ** 2
    lhs = diagnostics.column("u_l2_sq") + diagnostics.column("nu_grad_u_l2_sq_int")
    rhs = np.array([u0_sq + tau0_sq * gamma(params.a, params.nu, float(t)) ** 2 for t in times])
    report.add(
        make_check(
            "energy_inequality",
            "||u(t)||^2 + nu int ||grad u||^2 <= ||u0||^2 + ||tau0||^2 (1 - e^{-2at}) / (2 a nu)",
            max_ratio(lhs, rhs),
            1.0,
            tolerance=ENERGY_SLACK,
            note="max over samples of lhs / rhs",
        )
    )
    logger.info(f"Decay experiment finished: {len(report.failures)} of {len(report.checks)} checks failed")
    return finish(report, output, diagnostics, checkpoint=outcome.checkpoint)
