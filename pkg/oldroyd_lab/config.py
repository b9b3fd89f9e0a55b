"""
Experiment Configuration
key = value files parsed into validated pydantic models
"""

import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .services.oldroyd_solver import Params
from .utils.errors import ConfigurationError

logger = logging.getLogger(__name__)

EXPERIMENT_NAMES = ("decay", "energy", "lipschitz", "picard", "lorentz3d", "noncorot", "lifespan", "toolbox")
# calibration corpora start here unless toolbox.seed is set
CALIBRATION_SEED = 1000


class GridConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d: int = Field(2, ge=2, le=3, description="Spatial dimension")
    N: int = Field(64, ge=8, description="Points per axis, a power of two")
    L: float = Field(2.0 * math.pi, gt=0, description="Box length")

    @field_validator("N")
    @classmethod
    def power_of_two(cls, value: int) -> int:
        if value & (value - 1):
            raise ValueError(f"N must be a power of two, got {value}")
        return value


class TimeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dt: Optional[float] = Field(None, gt=0, description="Time step; CFL estimate when unset")
    T: float = Field(1.0, ge=0, description="Horizon")
    sample_every: int = Field(10, ge=1, description="Steps between diagnostic samples")


class InitialDataConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    generator: str = Field("random-band", pattern="^(taylor-green|random-band|single-block)$")
    seed: int = Field(0, ge=0)
    amplitude: float = Field(1.0, ge=0, description="Peak velocity")
    tau_amplitude: float = Field(1.0, ge=0, description="Peak stress magnitude")
    q0: int = Field(0, description="Lowest block of random-band data; the block of single-block data")
    q1: int = Field(1, description="Highest block of random-band data")


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: str = Field("results", description="Artifact directory")
    checkpoint: bool = Field(True, description="Write the final state of solver runs")


class DiagnosticsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    p: float = Field(2.0, ge=1, description="Lebesgue exponent of the L^p and B^{d/p}_{p,1} columns")
    weak_tolerance: float = Field(5e-3, ge=0, description="Relative slack on the non-increase of the stress weak norm")


class BoundsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    C: float = Field(8.0, gt=0, description="Generic constant of the analytic bounds")
    corpus: int = Field(5, ge=1, description="Solver runs per corpus when a bound constant is calibrated")


class PicardConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_max: int = Field(8, ge=2, description="Picard iterations")
    corpus: int = Field(5, ge=1, description="Seeded initial data in the contraction corpus")
    steps: int = Field(32, ge=1, description="Time nodes per iterate")
    horizon: Optional[float] = Field(None, gt=0, description="Override of the smallness horizon")


class ToolboxConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    corpus: int = Field(100, ge=1, description="Seeded fields per calibration corpus; a fresh corpus of the same size follows")
    seed: int = Field(CALIBRATION_SEED, ge=0, description="First seed of the calibration corpus")


class SweepConfig(BaseModel):
    key: Optional[str] = None
    values: List[str] = Field(default_factory=list)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiment: str = Field(..., pattern="^(decay|energy|lipschitz|picard|lorentz3d|noncorot|lifespan|toolbox)$")
    grid: GridConfig = Field(default_factory=GridConfig)
    params: Params = Field(default_factory=Params)
    time: TimeConfig = Field(default_factory=TimeConfig)
    initial_data: InitialDataConfig = Field(default_factory=InitialDataConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    diagnostics: DiagnosticsConfig = Field(default_factory=DiagnosticsConfig)
    bounds: BoundsConfig = Field(default_factory=BoundsConfig)
    picard: PicardConfig = Field(default_factory=PicardConfig)
    toolbox: ToolboxConfig = Field(default_factory=ToolboxConfig)
    epsilon: float = Field(0.01, gt=0, description="Smallness parameter")
    sweep: SweepConfig = Field(default_factory=SweepConfig)


SECTIONS = {
    "grid": GridConfig,
    "params": Params,
    "time": TimeConfig,
    "initial_data": InitialDataConfig,
    "output": OutputConfig,
    "diagnostics": DiagnosticsConfig,
    "bounds": BoundsConfig,
    "picard": PicardConfig,
    "toolbox": ToolboxConfig,
}
TOP_LEVEL_KEYS = ("experiment", "epsilon")
NULL_VALUES = ("", "none", "null")


def known_keys() -> List[str]:
    keys = list(TOP_LEVEL_KEYS)
    for section, model in SECTIONS.items():
        keys.extend(f"{section}.{name}" for name in model.model_fields)
    return keys


# dotted key -> raw value text
RawConfig = Dict[str, str]


def _split_line(raw: str, lineno: int) -> Optional[Tuple[str, str]]:
    text = raw.split("#", 1)[0].strip()
    if not text:
        return None
    if "=" not in text:
        raise ConfigurationError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
    key, value = (part.strip() for part in text.split("=", 1))
    if not key:
        raise ConfigurationError("empty key", line=lineno)
    return key, value


def _nest(entries: RawConfig) -> Dict[str, object]:
    nested: Dict[str, object] = {}
    for key, value in entries.items():
        if "." in key:
            section, name = key.split(".", 1)
            nested.setdefault(section, {})[name] = None if value.lower() in NULL_VALUES else value
        else:
            nested[key] = value
    return nested


# Each entry is (field, required relation, message)
CONSTRAINTS = {
    "decay": [("params.b", lambda c: c.params.b == 0.0, "decay requires b = 0"),
              ("params.mu", lambda c: c.params.mu == 0.0, "decay requires mu = 0")],
    "energy": [("params.b", lambda c: c.params.b == 0.0, "energy requires b = 0")],
    "lipschitz": [("params.b", lambda c: c.params.b == 0.0, "lipschitz requires b = 0"),
                  ("params.mu", lambda c: c.params.mu == 0.0, "lipschitz requires mu = 0")],
    "lorentz3d": [("grid.d", lambda c: c.grid.d == 3, "lorentz3d requires d = 3"),
                  ("params.mu", lambda c: c.params.mu == 0.0, "lorentz3d requires mu = 0"),
                  ("params.b", lambda c: c.params.b == 0.0, "lorentz3d requires b = 0")],
    "noncorot": [("params.mu", lambda c: c.params.mu > 0.0 or c.params.b != 0.0, "noncorot requires mu > 0 or b != 0")],
    "picard": [("params.b", lambda c: c.params.b == 0.0, "picard requires b = 0")],
}


def _check_constraints(config: ExperimentConfig, lines: Dict[str, int]) -> None:
    for key, holds, message in CONSTRAINTS.get(config.experiment, []):
        if not holds(config):
            raise ConfigurationError(message, line=lines.get(key, lines.get("experiment")))
    data = config.initial_data
    if data.generator == "random-band" and data.q0 > data.q1:
        raise ConfigurationError("initial_data.q0 must not exceed initial_data.q1", line=lines.get("initial_data.q0"))


def build_config(entries: RawConfig, lines: Dict[str, int]) -> ExperimentConfig:
    """Validate parsed entries; errors name the line of the offending key"""
    nested = _nest({k: v for k, v in entries.items() if not k.startswith("sweep.")})
    sweep_keys = [k for k in entries if k.startswith("sweep.")]
    if len(sweep_keys) > 1:
        raise ConfigurationError("only one sweep key is supported", line=lines[sweep_keys[1]])
    if sweep_keys:
        target = sweep_keys[0][len("sweep."):]
        values = [v.strip() for v in entries[sweep_keys[0]].split(",") if v.strip()]
        if not values:
            raise ConfigurationError(f"sweep over {target} lists no values", line=lines[sweep_keys[0]])
        nested["sweep"] = {"key": target, "values": values}
    try:
        config = ExperimentConfig.model_validate(nested)
    except ValidationError as e:
        error = e.errors()[0]
        key = ".".join(str(part) for part in error["loc"])
        line = lines.get(key)
        raise ConfigurationError(f"{key or 'config'}: {error['msg']}", line=line) from None
    _check_constraints(config, lines)
    return config


def parse_config_text(text: str) -> ExperimentConfig:
    entries: RawConfig = {}
    lines: Dict[str, int] = {}
    allowed = set(known_keys())
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parsed = _split_line(raw, lineno)
        if parsed is None:
            continue
        key, value = parsed
        base = key[len("sweep."):] if key.startswith("sweep.") else key
        if base not in allowed:
            raise ConfigurationError(f"unknown key {key!r}", line=lineno)
        if key in entries:
            raise ConfigurationError(f"duplicate key {key!r} (first set on line {lines[key]})", line=lineno)
        entries[key] = value
        lines[key] = lineno
    if "experiment" not in entries:
        raise ConfigurationError("missing required key 'experiment'")
    return build_config(entries, lines)


def parse_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e}")
    config = parse_config_text(text)
    logger.info(f"Loaded {config.experiment} config from {path}")
    return config


def expand_sweep(config: ExperimentConfig) -> List[ExperimentConfig]:
    """One config per sweep value, each writing to its own sweep_<i> subdirectory"""
    if config.sweep.key is None:
        return [config]
    section, _, name = config.sweep.key.partition(".")
    expanded = []
    for index, value in enumerate(config.sweep.values):
        data = config.model_dump()
        data["sweep"] = {"key": None, "values": []}
        if name:
            data[section][name] = None if value.lower() in NULL_VALUES else value
        else:
            data[section] = value
        data["output"]["directory"] = str(Path(config.output.directory) / f"sweep_{index}")
        try:
            run_config = ExperimentConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigurationError(f"sweep value {value!r} for {config.sweep.key}: {e.errors()[0]['msg']}") from None
        _check_constraints(run_config, {})
        expanded.append(run_config)
    return expanded


__all__ = [
    "EXPERIMENT_NAMES",
    "ExperimentConfig",
    "expand_sweep",
    "known_keys",
    "parse_config",
    "parse_config_text",
]
