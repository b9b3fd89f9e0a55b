"""
Errors
Exception hierarchy shared by the solver, the toolbox and the harness
"""

from typing import Any, Optional


class OldroydError(Exception):
    """Base class for every error raised by oldroyd_lab"""


class ConfigurationError(OldroydError, ValueError):
    """Invalid grid, parameter or configuration-file input"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonFiniteError(OldroydError, ValueError):
    """A field holds NaN or Inf samples where finite ones are required"""


class BlockRangeError(OldroydError, IndexError):
    """Dyadic block index outside the partition range"""


class SpectrumError(OldroydError, ValueError):
    """Spectrum outside partition coverage, or a zero block where one is required"""


class DivergenceError(OldroydError, ValueError):
    """Velocity field is not divergence-free"""


class StepSizeError(OldroydError):
    """Time step violates the CFL restriction or is not positive"""


class BlowUpError(OldroydError):
    """Integration produced non-finite or runaway values"""

    def __init__(self, message: str, last_state: Any = None, time: float = 0.0, diagnostics: Any = None):
        super().__init__(message)
        self.last_state = last_state
        self.time = time
        self.diagnostics = diagnostics


class BranchError(OldroydError, ValueError):
    """A mu > 0 expression was evaluated with mu = 0"""


class LifespanExceededError(OldroydError):
    """A bound was evaluated beyond the root of its lifespan denominator"""


class HorizonTooLargeError(OldroydError):
    """Picard iterates diverge, or no admissible horizon exists"""


class ReportError(OldroydError):
    """A verification record is malformed, for example it names no anchor"""
