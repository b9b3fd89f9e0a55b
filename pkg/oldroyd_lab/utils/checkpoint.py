"""
Checkpoint Files
Self-describing little-endian binary snapshots of a solver state
"""

import logging
import struct
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

MAGIC = b"OLDB"
VERSION = 1
HEADER = struct.Struct("<4sIII6d")


class CheckpointHeader(NamedTuple):
    version: int
    d: int
    N: int
    L: float
    t: float
    nu: float
    a: float
    mu: float
    b: float


class Checkpoint(NamedTuple):
    header: CheckpointHeader
    u: np.ndarray
    tau: np.ndarray


def write_checkpoint(path: Union[str, Path], u: np.ndarray, tau: np.ndarray, L: float, t: float, nu: float, a: float, mu: float, b: float) -> Path:
    """Header, then u components, then tau entries, as row-major <f8 samples"""
    path = Path(path)
    d = u.shape[0]
    N = u.shape[-1]
    header = HEADER.pack(MAGIC, VERSION, d, N, L, t, nu, a, mu, b)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(u, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(tau, dtype="<f8").tobytes())
    except OSError as e:
        logger.error(f"Failed to write checkpoint {path}: {e}")
        raise
    logger.info(f"Checkpoint written: {path} (t={t:g})")
    return path


def read_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < HEADER.size:
        raise ConfigurationError(f"{path} is too short to be a checkpoint")
    magic, version, d, N, L, t, nu, a, mu, b = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ConfigurationError(f"{path} has magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ConfigurationError(f"{path} has checkpoint version {version}, expected {VERSION}")
    points = N ** d
    payload = np.frombuffer(raw, dtype="<f8", offset=HEADER.size)
    if payload.size != (d + d * d) * points:
        raise ConfigurationError(f"{path} payload holds {payload.size} samples, expected {(d + d * d) * points}")
    u = payload[: d * points].reshape((d,) + (N,) * d)
    tau = payload[d * points :].reshape((d, d) + (N,) * d)
    return Checkpoint(CheckpointHeader(version, d, N, L, t, nu, a, mu, b), u.copy(), tau.copy())
