"""
Lorentz Norms
Weak Lebesgue L^{p,inf} norms and the threshold split of weak-L^p functions
"""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError
from .littlewood_paley import DyadicPartition, block_lp_norms
from .spectral import GridArray, lp_norm

logger = logging.getLogger(__name__)

SPLIT_MARGIN = 0.1


class WeakNormResult(NamedTuple):
    value: float
    argmax_level: float


def weak_lp_norm(f: GridArray, p: float) -> WeakNormResult:
    """sup over levels of lambda * m(|f| > lambda)^(1/p), exact for grid functions.

    Levels run over the distinct sample magnitudes; just below a_i the
    super-level set holds every sample >= a_i.
    """
    if not 1 <= p < np.inf:
        raise ConfigurationError(f"weak L^p exponent must lie in [1, inf), got {p}")
    magnitudes = np.sort(f.magnitude(), axis=None)
    count = magnitudes.size
    measures = f.grid.cell_volume * np.arange(count, 0, -1, dtype=np.float64)
    candidates = magnitudes * measures ** (1.0 / p)
    best = int(np.argmax(candidates))
    return WeakNormResult(float(candidates[best]), float(magnitudes[best]))


class LorentzSplit(NamedTuple):
    integrable: GridArray
    bounded: GridArray
    l1_ratio: float
    linf_ratio: float
    within_bounds: bool


def lorentz_split(f: GridArray, A: float, p: float) -> LorentzSplit:
    """f = f_A + f^A with f^A the clamp of f at c A^(-1/p), c the weak norm.

    Ratios are measured against C A^(1-1/p) and C A^(-1/p) where
    C = c max(1, 1/(p-1)) (1 + SPLIT_MARGIN).
    """
    if A <= 0:
        raise ConfigurationError(f"split parameter A must be positive, got {A}")
    if p <= 1:
        raise ConfigurationError(f"split needs p > 1 for an L^1 bound, got {p}")
    c = weak_lp_norm(f, p).value
    threshold = c * A ** (-1.0 / p)
    magnitude = f.magnitude()
    scale = np.minimum(1.0, threshold / np.where(magnitude > 0.0, magnitude, 1.0))
    bounded = type(f)(f.grid, f.values * scale)
    integrable = f - bounded

    constant = c * max(1.0, 1.0 / (p - 1.0)) * (1.0 + SPLIT_MARGIN)
    if constant == 0.0:
        return LorentzSplit(integrable, bounded, 0.0, 0.0, True)
    l1_ratio = lp_norm(integrable, 1.0) / (constant * A ** (1.0 - 1.0 / p))
    linf_ratio = lp_norm(bounded, np.inf) / (constant * A ** (-1.0 / p))
    within = l1_ratio <= 1.0 and linf_ratio <= 1.0
    if not within:
        logger.warning(f"Lorentz split exceeds its constant: l1 ratio {l1_ratio:.3f}, sup ratio {linf_ratio:.3f}")
    return LorentzSplit(integrable, bounded, l1_ratio, linf_ratio, within)


def besov_embedding_ratio(f: GridArray, p: float, q: float, partition: DyadicPartition) -> float:
    """sup_j 2^{j(d/q - d/p)} ||Delta_j f||_{L^q} divided by ||f||_{L^{p,inf}}, for q > p"""
    if not q > p:
        raise ConfigurationError(f"embedding needs q > p, got p={p}, q={q}")
    d = f.grid.d
    index = (0.0 if np.isinf(q) else d / q) - d / p
    norms = block_lp_norms(f, partition, q)
    lhs = float(np.max(2.0 ** (partition.q_values * index) * norms))
    weak = weak_lp_norm(f, p).value
    if weak == 0.0:
        return 0.0
    return lhs / weak
