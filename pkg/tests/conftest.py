"""
Pytest configuration and shared fixtures
"""

import os
from pathlib import Path
from typing import Callable

import numpy as np
import pytest

# Set test environment variables
os.environ["TESTING"] = "true"
os.environ["LOG_LEVEL"] = "DEBUG"
os.environ["OLDB_THREADS"] = "1"

from oldroyd_lab.services.oldroyd_solver import Params
from oldroyd_lab.utils.initial_data import InitialData, random_band
from oldroyd_lab.utils.littlewood_paley import DyadicPartition, build_partition
from oldroyd_lab.utils.spectral import Grid, make_grid


@pytest.fixture
def grid2() -> Grid:
    """Small 2D grid, partition range [-1, 2]"""
    return make_grid(2, 32)


@pytest.fixture
def grid64() -> Grid:
    return make_grid(2, 64)


@pytest.fixture
def grid3() -> Grid:
    """Small 3D grid, partition range [-1, 1]"""
    return make_grid(3, 16)


@pytest.fixture
def partition2(grid2) -> DyadicPartition:
    return build_partition(grid2)


@pytest.fixture
def partition64(grid64) -> DyadicPartition:
    return build_partition(grid64)


@pytest.fixture
def sample_data(grid2, partition2) -> InitialData:
    """Seeded random-band velocity and stress, peak amplitudes 0.5 and 0.2"""
    return random_band(grid2, seed=3, q0=0, q1=1, amplitude=0.5, tau_amplitude=0.2, partition=partition2)


@pytest.fixture
def damped_params() -> Params:
    return Params(nu=1.0, a=1.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def write_config(tmp_path) -> Callable[..., Path]:
    """Write a key = value config into tmp_path; output.directory defaults to tmp_path/out"""

    def _write(text: str, name: str = "experiment.cfg") -> Path:
        body = text.strip() + "\n"
        if "output.directory" not in body:
            body += f"output.directory = {tmp_path / 'out'}\n"
        path = tmp_path / name
        path.write_text(body)
        return path

    return _write
