"""
Lifespan experiment: the closed-form functionals and the generalized Gronwall lemma, without a solver run
"""

import logging
import math
from pathlib import Path
from typing import List, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial
from scipy.integrate import solve_ivp

from ..config import ExperimentConfig
from ..services.bounds import (
    HORIZON_CEILING,
    NORMALIZATIONS,
    evaluate_bounds,
    gamma,
    gronwall_lifespan,
    lifespan_functional,
    measure_initial_norms,
    psi1,
    theta_a,
    upsilon1,
    upsilon2,
)
from ..services.verification import VerificationReport, make_check
from .common import ExperimentOutcome, build_data, build_grid, finish, new_report, partition_for

logger = logging.getLogger(__name__)

SWEEP_POINTS = 17
# fraction of the lifespan lower bound the T sweep may reach
SWEEP_FRACTION = 0.9
MONOTONE_TOLERANCE = 1e-12
# damping rate standing in for the a -> 0 limit
SMALL_RATE = 1e-9
ORACLE_TRIPLES = 10
ORACLE_FRACTION = 0.95
ORACLE_SLACK = 1e-6
CLOSED_FORM_RATES = (2.0, 0.5)
BOUND_COLUMNS = ["T", "gamma", "theta_a", "phi", "psi1", "psi2", "upsilon1", "upsilon2", "theta_nu"]
ORACLE_COLUMNS = ["triple", "g1", "g2", "g3", "t_max", "horizon", "worst_ratio"]


def random_triple(rng: np.random.Generator) -> Tuple[List[float], List[float], List[float]]:
    """g1(0) = 0 with sub-unit slope, non-negative g2 and constant g3"""
    g1 = [0.0, float(rng.uniform(0.1, 0.9))]
    g2 = [float(rng.uniform(0.0, 1.0)), float(rng.uniform(0.0, 0.5))]
    g3 = [float(rng.uniform(0.5, 2.0))]
    return g1, g2, g3


def oracle_ratio(g1: List[float], g2: List[float], g3: List[float]) -> Tuple[float, float, float]:
    """Integrate the equality case and return (t_max, horizon, max f / bound)"""
    lemma = gronwall_lifespan(g1, g2, g3)
    horizon = ORACLE_FRACTION * lemma.t_max
    p1, p2, p3 = Polynomial(g1), Polynomial(g2), Polynomial(g3)
    d1, d3 = p1.deriv(), p3.deriv()

    # state (f, int f^2)
    def rhs(t, y):
        f, F = y
        return [d1(t) + p2(t) * f + d3(t) * F + p3(t) * f * f, f * f]

    times = np.linspace(0.0, horizon, 65)
    solution = solve_ivp(rhs, (0.0, horizon), [p1(0.0), 0.0], t_eval=times, method="DOP853", rtol=1e-11, atol=1e-13)
    f = solution.y[0][1:]
    bound = lemma.bound(times[1:])
    return lemma.t_max, horizon, float(np.max(f / bound))


def _gronwall_checks(report: VerificationReport, seed: int) -> pd.DataFrame:
    for c in CLOSED_FORM_RATES:
        lemma = gronwall_lifespan([1.0], [0.0], [c])
        report.add(
            make_check(
                f"gronwall_closed_form_c{c:g}",
                "with g2 = 0 and constant g3 = c the lemma's lifespan is sqrt(2/c)",
                lemma.t_max,
                math.sqrt(2.0 / c),
                relation="eq_rel",
                tolerance=1e-8,
            )
        )
    report.add(
        make_check(
            "gronwall_unbounded_without_g3",
            "with g3 = 0 the lemma gives no finite lifespan",
            gronwall_lifespan([1.0], [0.5], [0.0]).t_max,
            HORIZON_CEILING,
            relation="ge",
        )
    )

    rng = np.random.default_rng(seed)
    rows = []
    for index in range(ORACLE_TRIPLES):
        g1, g2, g3 = random_triple(rng)
        t_max, horizon, worst = oracle_ratio(g1, g2, g3)
        rows.append({"triple": index, "g1": str(g1), "g2": str(g2), "g3": str(g3), "t_max": t_max, "horizon": horizon, "worst_ratio": worst})
    frame = pd.DataFrame(rows, columns=ORACLE_COLUMNS)
    report.add(
        make_check(
            "gronwall_oracle_domination",
            "solutions of the equality case stay below the lemma's bounding curve up to the lifespan",
            float(frame["worst_ratio"].max()),
            1.0,
            tolerance=ORACLE_SLACK,
            note=f"{ORACLE_TRIPLES} random triples, integrated to {ORACLE_FRACTION:g} of the lifespan",
        )
    )
    return frame


def _relative_decrease(values: np.ndarray) -> float:
    previous, following = values[:-1], values[1:]
    scale = np.maximum(np.abs(previous), np.finfo(np.float64).tiny)
    return float(np.max(np.clip((previous - following) / scale, 0.0, None), initial=0.0))


def run(config: ExperimentConfig) -> ExperimentOutcome:
    output = Path(config.output.directory)
    grid = build_grid(config)
    partition = partition_for(grid)
    data = build_data(config, grid, partition)
    params = config.params
    nu = params.nu
    C = config.bounds.C
    norms = measure_initial_norms(data.u, data.tau, partition, config.diagnostics.p)
    report = new_report(config, None, NORMALIZATIONS)

    t_max = evaluate_bounds(0.0, params, norms, C).t_max_lower
    horizon = min(config.time.T, SWEEP_FRACTION * t_max)
    sweep = np.linspace(0.0, horizon, SWEEP_POINTS)
    evaluations = [evaluate_bounds(float(T), params, norms, C) for T in sweep]
    bounds = pd.DataFrame([e.model_dump(include=set(BOUND_COLUMNS)) for e in evaluations], columns=BOUND_COLUMNS)
    logger.info(f"Evaluated the functionals on {SWEEP_POINTS} horizons up to T={horizon:g} (lifespan bound {t_max:.6g})")

    for name in ("upsilon1", "upsilon2"):
        report.add(
            make_check(
                f"{name}_monotone",
                f"{name} is non-decreasing in the horizon",
                _relative_decrease(bounds[name].to_numpy()),
                MONOTONE_TOLERANCE,
                note=f"relative decrease over T in [0, {horizon:.6g}]",
            )
        )
    report.add(
        make_check(
            "upsilon1_at_zero",
            "upsilon1(0) = (||u0||_{B^{-1}_{inf,1}} + psi1(0)) / nu",
            upsilon1(0.0, params, norms, C),
            (norms.u0_Binf_m1 + psi1(0.0, params, norms, C)) / nu,
            relation="eq_rel",
            tolerance=1e-12,
        )
    )
    report.add(
        make_check(
            "upsilon2_at_zero",
            "upsilon2(0) = ||u0||_{B^{-1}_{inf,1}} + psi1(0)",
            upsilon2(0.0, params, norms, C),
            norms.u0_Binf_m1 + psi1(0.0, params, norms, C),
            relation="eq_rel",
            tolerance=1e-12,
        )
    )

    T = config.time.T
    report.add(
        make_check(
            "gamma_continuous_at_zero_rate",
            "gamma(a, nu, T) tends to sqrt(T / nu) as a -> 0",
            gamma(SMALL_RATE, nu, T),
            gamma(0.0, nu, T),
            relation="eq_rel",
            tolerance=1e-6,
        )
    )
    report.add(
        make_check(
            "theta_a_continuous_at_zero_rate",
            "theta_a(T) tends to T as a -> 0",
            theta_a(SMALL_RATE, T),
            theta_a(0.0, T),
            relation="eq_rel",
            tolerance=1e-6,
        )
    )
    if math.isfinite(t_max):
        report.add(
            make_check(
                "lifespan_functional_at_bound",
                "the lifespan lower bound is where the lifespan functional reaches 1",
                lifespan_functional(t_max, params, norms, C),
                1.0,
                relation="eq_rel",
                tolerance=1e-6,
            )
        )

    oracle = _gronwall_checks(report, config.initial_data.seed)
    logger.info(f"Lifespan experiment finished: {len(report.failures)} of {len(report.checks)} checks failed")
    return finish(report, output, frames={"bounds.csv": bounds, "gronwall.csv": oracle})
