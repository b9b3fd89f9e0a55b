"""
Analytic Bounds
Closed-form a-priori functionals, lifespan lower bounds and the generalized Gronwall lemma
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import quad
from scipy.optimize import bisect
from scipy.special import roots_legendre

from ..utils.errors import BranchError, ConfigurationError, LifespanExceededError
from ..utils.littlewood_paley import DyadicPartition, block_lp_norms_many, weighted_sum
from ..utils.lorentz import weak_lp_norm
from ..utils.spectral import TensorField, VectorField, lp_norm
from .oldroyd_solver import Params

logger = logging.getLogger(__name__)

DEFAULT_C = 8.0
QUADRATURE_NODES = 128
LIFESPAN_RTOL = 1e-8
# doubling stops here and the lifespan is reported as unbounded
HORIZON_CEILING = 1e12
# rescaled Lorentz data sits at this fraction of the smallness threshold
SMALLNESS_FILL = 0.9

NORMALIZATIONS = [
    "upsilon2 uses ||tau0|| in B^0_{inf,1} in every term",
    "psi2 is evaluated with the (nu, mu, a) parameters in every occurrence",
    "upsilon1(0) = (||u0||_{B^-1_{inf,1}} + psi1(0)) / nu",
    "energy inequality: ||u||^2 + nu int ||grad u||^2 <= ||u0||^2 + ||tau0||^2 gamma^2",
]


class InitialNorms(BaseModel):
    """Norms of the initial data entering the bounds"""

    model_config = ConfigDict(frozen=True)

    u0_L2: float = Field(0.0, ge=0, description="||u0||_{L^2}")
    tau0_L2: float = Field(0.0, ge=0, description="||tau0||_{L^2}")
    u0_Binf_m1: float = Field(0.0, ge=0, description="||u0||_{B^{-1}_{inf,1}}")
    tau0_Binf_0: float = Field(0.0, ge=0, description="||tau0||_{B^0_{inf,1}}")
    u0_Bp: float = Field(0.0, ge=0, description="||u0||_{B^{d/p-1}_{p,1}}")
    tau0_Bp: float = Field(0.0, ge=0, description="||tau0||_{B^{d/p}_{p,1}}")
    u0_weak_d: float = Field(0.0, ge=0, description="||u0||_{L^{d,inf}}")
    tau0_weak_d2: float = Field(0.0, ge=0, description="||tau0||_{L^{d/2,inf}}")
    u0_Bp_high: float = Field(0.0, ge=0, description="||u0||_{B^{d/p}_{p,1}}")
    tau0_Bp_high: float = Field(0.0, ge=0, description="||tau0||_{B^{d/p+1}_{p,1}}")


def measure_initial_norms(u0: VectorField, tau0: TensorField, partition: DyadicPartition, p: float) -> InitialNorms:
    d = u0.grid.d
    q = partition.q_values
    u_blocks = block_lp_norms_many(u0, partition, {np.inf, p})
    tau_blocks = block_lp_norms_many(tau0, partition, {np.inf, p})
    return InitialNorms(
        u0_L2=lp_norm(u0, 2.0),
        tau0_L2=lp_norm(tau0, 2.0),
        u0_Binf_m1=weighted_sum(u_blocks[np.inf], q, -1.0, 1.0),
        tau0_Binf_0=weighted_sum(tau_blocks[np.inf], q, 0.0, 1.0),
        u0_Bp=weighted_sum(u_blocks[p], q, d / p - 1.0, 1.0),
        tau0_Bp=weighted_sum(tau_blocks[p], q, d / p, 1.0),
        u0_weak_d=weak_lp_norm(u0, float(d)).value,
        tau0_weak_d2=weak_lp_norm(tau0, d / 2.0).value,
        u0_Bp_high=weighted_sum(u_blocks[p], q, d / p, 1.0),
        tau0_Bp_high=weighted_sum(tau_blocks[p], q, d / p + 1.0, 1.0),
    )


def _exp(x: float) -> float:
    with np.errstate(over="ignore"):
        return float(np.exp(x))


def gamma(a: float, nu: float, T: float) -> float:
    if a == 0.0:
        return math.sqrt(T / nu)
    return math.sqrt(-math.expm1(-2.0 * a * T) / (2.0 * a * nu))


def theta_a(a: float, T: float) -> float:
    if a == 0.0:
        return T
    return -math.expm1(-a * T) / a


def _require_coupling(mu: float) -> None:
    if mu <= 0.0:
        raise BranchError(f"expression is defined for mu > 0 only, got mu={mu}")


def phi_coupled(T: float, params: Params, norms: InitialNorms) -> float:
    _require_coupling(params.mu)
    A, B = norms.u0_L2, norms.tau0_L2
    g = gamma(params.a, params.nu, T)
    root_mu = math.sqrt(params.mu)
    inner = (1.0 + g * root_mu) * A + A ** 2 / params.nu + (1.0 / root_mu + g) * B + B ** 2 * g ** 2 / params.nu
    return inner ** 2


def phi(T: float, params: Params, norms: InitialNorms) -> float:
    if params.mu > 0.0:
        return phi_coupled(T, params, norms)
    A, B = norms.u0_L2, norms.tau0_L2
    g = gamma(params.a, params.nu, T)
    return (A + A ** 2 / params.nu + B * g + B ** 2 * g ** 2 / params.nu) ** 2


def psi1(T: float, params: Params, norms: InitialNorms, C: float = DEFAULT_C) -> float:
    value = phi(T, params, norms)
    nu = params.nu
    return C * (nu ** -1.5 * value ** 2 + nu ** -1.25 * value * norms.u0_L2)


def psi2(T: float, params: Params, norms: InitialNorms, C: float = DEFAULT_C) -> float:
    nu = params.nu
    energy = math.sqrt(params.mu * norms.u0_L2 ** 2 + norms.tau0_L2 ** 2)
    return C * (
        gamma(params.a, nu, T) * energy + nu ** -1.25 * phi(T, params, norms) + norms.u0_L2 / nu
    )


def lifespan_functional(T: float, params: Params, norms: InitialNorms, C: float = DEFAULT_C) -> float:
    """C (mu / nu^2) T^2 psi2 exp{2 (C/nu) psi2 theta_a Z + 2 C (mu/nu) psi2 T}; the solution lives while it is < 1"""
    nu, mu = params.nu, params.mu
    p2 = psi2(T, params, norms, C)
    exponent = 2.0 * C / nu * p2 * theta_a(params.a, T) * norms.tau0_Binf_0 + 2.0 * C * mu / nu * p2 * T
    return C * mu / nu ** 2 * T ** 2 * p2 * _exp(exponent)


def upsilon1_coupled(T: float, params: Params, norms: InitialNorms, C: float = DEFAULT_C) -> float:
    _require_coupling(params.mu)
    nu, mu = params.nu, params.mu
    p1 = psi1(T, params, norms, C)
    p2 = psi2(T, params, norms, C)
    th = theta_a(params.a, T)
    Z = norms.tau0_Binf_0
    numerator = (norms.u0_Binf_m1 + p1 + C * (p2 + C) * Z * th) / nu
    denominator = 1.0 - lifespan_functional(T, params, norms, C)
    if denominator <= 0.0:
        raise LifespanExceededError(f"T={T:g} lies beyond the lifespan bound (denominator {denominator:.3e})")
    return numerator / denominator * _exp(C / nu * p2 * th * Z + 2.0 * C * mu / nu * p2 * T)


def upsilon1(T: float, params: Params, norms: InitialNorms, C: float = DEFAULT_C) -> float:
    if params.mu > 0.0:
        return upsilon1_coupled(T, params, norms, C)
    nu = params.nu
    p2 = psi2(T, params, norms, C)
    th = theta_a(params.a, T)
    numerator = (norms.u0_Binf_m1 + psi1(T, params, norms, C) + C * (p2 + C) * norms.tau0_Binf_0 * th) / nu
    return numerator * _exp(C / nu * th * p2)


def upsilon1_integral(T: float, params: Params, norms: InitialNorms, C: float = DEFAULT_C) -> float:
    """Gauss-Legendre quadrature of upsilon1 over [0, T]"""
    if T == 0.0:
        return 0.0
    nodes, weights = roots_legendre(QUADRATURE_NODES)
    times = 0.5 * T * (nodes + 1.0)
    values = np.array([upsilon1(float(t), params, norms, C) for t in times])
    return float(0.5 * T * np.dot(weights, values))


def upsilon2(T: float, params: Params, norms: InitialNorms, C: float = DEFAULT_C) -> float:
    nu, mu = params.nu, params.mu
    p2 = psi2(T, params, norms, C)
    Z = norms.tau0_Binf_0
    integral = upsilon1_integral(T, params, norms, C)
    return (
        norms.u0_Binf_m1
        + psi1(T, params, norms, C)
        + C * (p2 + 1.0) * Z * T
        + C * nu * Z * (p2 + 1.0) * integral
        + C * mu * nu * p2 * integral
    )


def lifespan_lower_bound(params: Params, norms: InitialNorms, C: float = DEFAULT_C) -> float:
    """sup{T : lifespan_functional(T) < 1}; +inf without coupling"""
    if params.mu == 0.0:
        return math.inf

    def excess(T: float) -> float:
        return lifespan_functional(T, params, norms, C) - 1.0

    lo, hi = 0.0, 1.0
    while excess(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > HORIZON_CEILING:
            logger.info(f"Lifespan functional stays below 1 up to T={HORIZON_CEILING:g}; bound is unbounded")
            return math.inf
    return float(bisect(excess, lo, hi, xtol=1e-12 * hi, rtol=LIFESPAN_RTOL))


def theta_nu(u0_Binf_m1: float, tau0_Binf_0: float, nu: float, T: float, C: float = DEFAULT_C) -> float:
    exponent = C * T * tau0_Binf_0 / nu
    return C * u0_Binf_m1 * _exp(exponent) + nu * math.expm1(exponent)


@dataclass(frozen=True)
class GronwallLifespan:
    """Lifespan and bounding curve for f <= g1 + int g2 f + g3 int f^2"""

    t_max: float
    g1: Polynomial
    g2: Polynomial
    g3: Polynomial

    @property
    def g2_integral(self) -> Polynomial:
        return self.g2.integ()

    def consumed(self, t: float) -> float:
        """int_0^t s g3(s) exp{2 int_0^s g2} ds"""
        if t == 0.0:
            return 0.0
        G2 = self.g2_integral
        value, _ = quad(lambda s: s * self.g3(s) * _exp(2.0 * G2(s)), 0.0, t, limit=200)
        return float(value)

    def bound(self, times: Sequence[float]) -> np.ndarray:
        G2 = self.g2_integral
        curve = []
        for t in np.atleast_1d(np.asarray(times, dtype=np.float64)):
            if t >= self.t_max:
                curve.append(np.inf)
                continue
            curve.append(self.g1(t) * _exp(G2(t)) / (1.0 - self.consumed(float(t))))
        return np.array(curve)


def gronwall_lifespan(g1: Sequence[float], g2: Sequence[float], g3: Sequence[float]) -> GronwallLifespan:
    """Polynomials are given by ascending coefficient lists with non-negative entries"""
    polys = []
    for name, coeffs in (("g1", g1), ("g2", g2), ("g3", g3)):
        coeffs = np.atleast_1d(np.asarray(coeffs, dtype=np.float64))
        if np.any(coeffs < 0):
            raise ConfigurationError(f"{name} must have non-negative coefficients, got {coeffs.tolist()}")
        polys.append(Polynomial(coeffs))
    result = GronwallLifespan(math.inf, *polys)
    if not np.any(polys[2].coef > 0):
        return result

    def excess(T: float) -> float:
        return result.consumed(T) - 1.0

    lo, hi = 0.0, 1.0
    while excess(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > HORIZON_CEILING:
            return result
    t_max = float(bisect(excess, lo, hi, xtol=1e-14, rtol=1e-12))
    return GronwallLifespan(t_max, *polys)


def tau_besov_bound(T: float, params: Params, norms: InitialNorms, C: float = DEFAULT_C) -> float:
    """e^{-aT} ||tau0||_{B^{d/p}_{p,1}} exp{C upsilon1 / nu}"""
    return math.exp(-params.a * T) * norms.tau0_Bp * _exp(C / params.nu * upsilon1(T, params, norms, C))


def tau_binf0_bound(T: float, params: Params, norms: InitialNorms, C: float = DEFAULT_C) -> float:
    """C ||tau0||_{B^0_{inf,1}} (1 + upsilon1 / nu), a bound on ||tau||_{L^inf B^0_{inf,1}}"""
    return C * norms.tau0_Binf_0 * (1.0 + upsilon1(T, params, norms, C) / params.nu)


def u_besov_bound(T: float, params: Params, norms: InitialNorms, C: float = DEFAULT_C) -> float:
    """Bound on ||u||_{L^inf B^{d/p-1}_{p,1}} + nu ||u||_{L^1 B^{d/p+1}_{p,1}}"""
    nu = params.nu
    u1 = upsilon1(T, params, norms, C)
    u2 = upsilon2(T, params, norms, C)
    return (norms.u0_Bp + theta_a(params.a, T) * norms.tau0_Bp) * _exp(C / nu * u1 * (u2 / nu + 1.0))


def smallness_threshold(norms: InitialNorms, c: float) -> float:
    """Admissible size of |b| + mu for global existence with damping"""
    size = (
        norms.tau0_L2
        + norms.tau0_Bp
        + norms.tau0_Bp_high
        + norms.u0_L2
        + norms.u0_Bp
        + norms.u0_Bp_high
    )
    return c / (1.0 + _exp(size))


def in_smallness_regime(params: Params, norms: InitialNorms, c: float) -> bool:
    return params.a > 0.0 and abs(params.b) + params.mu <= smallness_threshold(norms, c)


class LorentzSmallness(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def lorentz_smallness(norms: InitialNorms, nu: float, eps: float) -> LorentzSmallness:
    """||u0||_{L^{d,inf}} + ||tau0||_{L^{d/2,inf}} / nu <= eps / nu"""
    lhs = norms.u0_weak_d + norms.tau0_weak_d2 / nu
    rhs = eps / nu
    return LorentzSmallness(lhs, rhs, lhs <= rhs)


def lorentz_rescaling(norms: InitialNorms, nu: float, eps: float, fill: float = SMALLNESS_FILL) -> float:
    """Factor in (0, 1] that brings the weak-norm data size down to fill * eps / nu"""
    premise = lorentz_smallness(norms, nu, eps)
    target = fill * premise.rhs
    if premise.lhs <= target:
        return 1.0
    return target / premise.lhs


def lorentz_regime_tau_bound(T: float, norms: InitialNorms, nu: float, C: float = DEFAULT_C) -> float:
    th = theta_nu(norms.u0_Binf_m1, norms.tau0_Binf_0, nu, T, C)
    return norms.tau0_Bp * _exp(C * T * th)


def lorentz_regime_u_bound(T: float, norms: InitialNorms, nu: float, C: float = DEFAULT_C) -> float:
    th = theta_nu(norms.u0_Binf_m1, norms.tau0_Binf_0, nu, T, C)
    return (norms.u0_Bp + C * T * norms.tau0_Bp * _exp(C * T * th)) * _exp(C * th / nu)


def lorentz_regime_weak_u_bound(norms: InitialNorms, nu: float, C: float = DEFAULT_C) -> float:
    """C (||u0||_{L^{d,inf}} + ||tau0||_{L^{d/2,inf}} / nu), uniform in time"""
    return C * (norms.u0_weak_d + norms.tau0_weak_d2 / nu)


class BoundEvaluation(BaseModel):
    model_config = ConfigDict(frozen=True)

    T: float
    C: float
    gamma: float
    theta_a: float
    phi: float
    psi1: float
    psi2: float
    upsilon1: float
    upsilon2: float
    theta_nu: float
    t_max_lower: float
    normalizations: List[str] = Field(default_factory=lambda: list(NORMALIZATIONS))


def evaluate_bounds(T: float, params: Params, norms: InitialNorms, C: float = DEFAULT_C) -> BoundEvaluation:
    """Every functional at horizon T; raises LifespanExceededError past the lifespan bound"""
    if T < 0:
        raise ConfigurationError(f"horizon must be non-negative, got {T}")
    try:
        evaluation = BoundEvaluation(
            T=T,
            C=C,
            gamma=gamma(params.a, params.nu, T),
            theta_a=theta_a(params.a, T),
            phi=phi(T, params, norms),
            psi1=psi1(T, params, norms, C),
            psi2=psi2(T, params, norms, C),
            upsilon1=upsilon1(T, params, norms, C),
            upsilon2=upsilon2(T, params, norms, C),
            theta_nu=theta_nu(norms.u0_Binf_m1, norms.tau0_Binf_0, params.nu, T, C),
            t_max_lower=lifespan_lower_bound(params, norms, C),
        )
    except LifespanExceededError as e:
        logger.error(f"Bound evaluation failed: {e}")
        raise
    logger.debug(f"Bounds at T={T:g}: upsilon1={evaluation.upsilon1:.4e}, upsilon2={evaluation.upsilon2:.4e}")
    return evaluation
