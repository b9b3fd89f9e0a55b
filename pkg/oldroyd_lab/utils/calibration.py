"""
Calibration
Generic-constant fitting over a seeded corpus
"""

import logging
import math
from typing import Callable, Iterable, NamedTuple

import numpy as np
from scipy.optimize import bisect

from .errors import SpectrumError

logger = logging.getLogger(__name__)

CALIBRATION_MARGIN = 0.1
CONSTANT_FLOOR = 1e-6
CONSTANT_CEILING = 1e6
CONSTANT_RTOL = 1e-10
CONSTANT_XTOL = 1e-12


class CalibratedConstant(NamedTuple):
    value: float
    worst_ratio: float
    samples: int


def calibrate_constant(ratios: Iterable[float], margin: float = CALIBRATION_MARGIN, family: str = "") -> CalibratedConstant:
    """Largest measured LHS/RHS ratio inflated by the margin"""
    ratios = np.asarray(list(ratios), dtype=np.float64)
    if ratios.size == 0:
        raise SpectrumError(f"no samples to calibrate {family or 'constant'}")
    finite = ratios[np.isfinite(ratios)]
    if finite.size != ratios.size:
        raise SpectrumError(f"non-finite ratio in the {family or 'calibration'} corpus")
    worst = float(finite.max())
    value = worst * (1.0 + margin)
    logger.info(f"Calibrated {family or 'constant'}: C={value:.6g} from {ratios.size} samples (worst ratio {worst:.6g})")
    return CalibratedConstant(value, worst, int(ratios.size))


def minimal_constant(
    excess: Callable[[float], float],
    floor: float = CONSTANT_FLOOR,
    ceiling: float = CONSTANT_CEILING,
    family: str = "",
) -> float:
    """Smallest C in [floor, ceiling] with excess(C) <= 0, for excess non-increasing in C.

    Returns floor when the inequality already holds there, and inf when it still fails at the ceiling.
    """

    def holds(C: float) -> bool:
        return bool(excess(C) <= 0.0)

    if holds(floor):
        return floor
    lo, hi = floor, max(1.0, floor)
    while not holds(hi):
        if hi >= ceiling:
            logger.warning(f"{family or 'inequality'} fails for every C up to {ceiling:g}")
            return math.inf
        lo, hi = hi, min(2.0 * hi, ceiling)
    root = bisect(lambda C: -1.0 if holds(C) else 1.0, lo, hi, xtol=CONSTANT_XTOL, rtol=CONSTANT_RTOL)
    if holds(root):
        return root
    # step past the bisection tolerance
    return min(hi, root * (1.0 + 2.0 * CONSTANT_RTOL) + 2.0 * CONSTANT_XTOL)
