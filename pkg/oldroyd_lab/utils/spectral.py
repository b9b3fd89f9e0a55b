"""
Spectral Core
Periodic-torus grid, FFT transforms, differential operators and projectors
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple, Type, TypeVar, Union

import numpy as np
import scipy.fft

from .errors import ConfigurationError, NonFiniteError

logger = logging.getLogger(__name__)

Number = Union[int, float]
F = TypeVar("F", bound="GridArray")


def get_worker_count() -> int:
    """Number of FFT worker threads, read from OLDB_THREADS"""
    raw = os.getenv("OLDB_THREADS", "1")
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigurationError(f"OLDB_THREADS must be an integer, got {raw!r}")
    if workers < 1:
        raise ConfigurationError(f"OLDB_THREADS must be >= 1, got {workers}")
    return workers


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the torus [0, L)^d"""

    d: int
    N: int
    L: float

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def axes(self) -> Tuple[int, ...]:
        # spatial axes are always the trailing ones
        return tuple(range(-self.d, 0))

    @property
    def spacing(self) -> float:
        return self.L / self.N

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.d

    @property
    def volume(self) -> float:
        return self.L ** self.d

    @property
    def min_wavenumber(self) -> float:
        return 2.0 * np.pi / self.L

    @cached_property
    def mode_indices(self) -> np.ndarray:
        """Integer mode numbers k, shape (d, N, ..., N), entries in [-N/2, N/2)"""
        k = np.fft.fftfreq(self.N, d=1.0 / self.N)
        return np.stack(np.meshgrid(*([k] * self.d), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Frequency vectors xi = (2 pi / L) k"""
        return self.min_wavenumber * self.mode_indices

    @cached_property
    def derivative_wavenumbers(self) -> np.ndarray:
        """Wavenumbers used by odd-order derivatives; the unpaired Nyquist mode is zeroed"""
        xi = self.wavenumbers.copy()
        xi[self.mode_indices == -(self.N // 2)] = 0.0
        return xi

    @cached_property
    def xi_norm_sq(self) -> np.ndarray:
        return np.sum(self.wavenumbers ** 2, axis=0)

    @cached_property
    def xi_norm(self) -> np.ndarray:
        return np.sqrt(self.xi_norm_sq)

    @cached_property
    def coordinates(self) -> np.ndarray:
        x = self.spacing * np.arange(self.N)
        return np.stack(np.meshgrid(*([x] * self.d), indexing="ij"))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return np.all(np.abs(self.mode_indices) <= self.N / 3.0, axis=0)

    def forward(self, values: np.ndarray) -> np.ndarray:
        return scipy.fft.fftn(values, axes=self.axes, workers=get_worker_count())

    def inverse(self, hat: np.ndarray) -> np.ndarray:
        return scipy.fft.ifftn(hat, axes=self.axes, workers=get_worker_count()).real


def make_grid(d: int, N: int, L: float = 2.0 * np.pi) -> Grid:
    """Validate and build a periodic grid"""
    if d not in (2, 3):
        raise ConfigurationError(f"dimension must be 2 or 3, got {d}")
    if not isinstance(N, (int, np.integer)) or N < 8 or (N & (N - 1)) != 0:
        raise ConfigurationError(f"N must be a power of two >= 8, got {N}")
    if not np.isfinite(L) or L <= 0:
        raise ConfigurationError(f"box length must be positive, got {L}")
    grid = Grid(d=int(d), N=int(N), L=float(L))
    logger.debug(f"Grid initialized: d={grid.d}, N={grid.N}, L={grid.L}")
    return grid


class GridArray:
    """Real samples on a grid with a lazily computed spectral representation.

    The trailing d axes are spatial; leading axes index components.
    Instances are immutable: the sample array is marked read-only.
    """

    rank = 0

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.array(values, dtype=np.float64)
        expected = (grid.d,) * self.rank + grid.shape
        if values.shape != expected:
            raise ConfigurationError(
                f"{type(self).__name__} expects shape {expected}, got {values.shape}"
            )
        values.flags.writeable = False
        self.grid = grid
        self.values = values

    @classmethod
    def from_hat(cls: Type[F], grid: Grid, hat: np.ndarray) -> F:
        """Build from Hermitian spectral coefficients, keeping them as the cache"""
        field = cls(grid, grid.inverse(hat))
        field.__dict__["hat"] = hat
        return field

    @classmethod
    def zeros(cls: Type[F], grid: Grid) -> F:
        return cls(grid, np.zeros((grid.d,) * cls.rank + grid.shape))

    @cached_property
    def hat(self) -> np.ndarray:
        return self.grid.forward(self.values)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def require_finite(self) -> None:
        if not self.is_finite():
            raise NonFiniteError(f"{type(self).__name__} contains non-finite samples")

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean (Frobenius) magnitude"""
        if self.rank == 0:
            return np.abs(self.values)
        flat = self.values.reshape((-1,) + self.grid.shape)
        return np.sqrt(np.sum(flat ** 2, axis=0))

    def max_abs(self) -> float:
        return float(np.max(self.magnitude()))

    def mean(self) -> np.ndarray:
        return self.values.mean(axis=self.grid.axes)

    def _wrap(self: F, values: np.ndarray) -> F:
        return type(self)(self.grid, values)

    def __add__(self: F, other: F) -> F:
        return self._wrap(self.values + other.values)

    def __sub__(self: F, other: F) -> F:
        return self._wrap(self.values - other.values)

    def __neg__(self: F) -> F:
        return self._wrap(-self.values)

    def __mul__(self: F, scalar: Number) -> F:
        return self._wrap(self.values * scalar)

    __rmul__ = __mul__

    def __truediv__(self: F, scalar: Number) -> F:
        return self._wrap(self.values / scalar)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(d={self.grid.d}, N={self.grid.N}, L={self.grid.L:g})"


class Field(GridArray):
    """Real scalar field"""

    rank = 0

    def __mul__(self, other):
        if isinstance(other, Field):
            return Field(self.grid, self.values * other.values)
        return super().__mul__(other)


class VectorField(GridArray):
    """d-component real vector field"""

    rank = 1

    def component(self, i: int) -> Field:
        return Field(self.grid, self.values[i])

    @classmethod
    def from_components(cls, components) -> "VectorField":
        components = list(components)
        return cls(components[0].grid, np.stack([c.values for c in components]))

    def is_divergence_free(self, tol: float = 1e-10) -> bool:
        div = l2_norm(divergence(self))
        grad = l2_norm(velocity_gradient(self))
        return div <= tol * max(grad, np.finfo(float).tiny)


class TensorField(GridArray):
    """d x d real tensor field"""

    rank = 2

    def entry(self, i: int, j: int) -> Field:
        return Field(self.grid, self.values[i, j])

    def transpose(self) -> "TensorField":
        return TensorField(self.grid, np.swapaxes(self.values, 0, 1))

    def symmetrized(self) -> "TensorField":
        return TensorField(self.grid, 0.5 * (self.values + np.swapaxes(self.values, 0, 1)))

    def asymmetry(self) -> float:
        """max |tau_ij - tau_ji| relative to max |tau|"""
        scale = self.max_abs()
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(self.values - np.swapaxes(self.values, 0, 1)))) / scale

    def is_symmetric(self, tol: float = 1e-10) -> bool:
        return self.asymmetry() <= tol

    @classmethod
    def identity(cls, grid: Grid, scale: float = 1.0) -> "TensorField":
        eye = np.eye(grid.d).reshape((grid.d, grid.d) + (1,) * grid.d)
        return cls(grid, scale * np.broadcast_to(eye, (grid.d, grid.d) + grid.shape).copy())


def apply_multiplier(field: F, multiplier: np.ndarray) -> F:
    """Apply a real Fourier multiplier (shape of the grid) to every component"""
    return type(field).from_hat(field.grid, field.hat * multiplier)


def gradient(f: Field) -> VectorField:
    f.require_finite()
    xi = f.grid.derivative_wavenumbers
    return VectorField.from_hat(f.grid, 1j * xi * f.hat)


def velocity_gradient(u: VectorField) -> TensorField:
    """(grad u)_ij = d_j u_i"""
    u.require_finite()
    xi = u.grid.derivative_wavenumbers
    return TensorField.from_hat(u.grid, 1j * u.hat[:, None] * xi[None, :])


def divergence(v: VectorField) -> Field:
    v.require_finite()
    xi = v.grid.derivative_wavenumbers
    return Field.from_hat(v.grid, np.sum(1j * xi * v.hat, axis=0))


def tensor_divergence(tau: TensorField) -> VectorField:
    """(div tau)_i = sum_j d_j tau_ij"""
    tau.require_finite()
    xi = tau.grid.derivative_wavenumbers
    return VectorField.from_hat(tau.grid, np.sum(1j * tau.hat * xi[None, :], axis=1))


def laplacian(f: GridArray) -> GridArray:
    f.require_finite()
    return apply_multiplier(f, -f.grid.xi_norm_sq)


def leray_hat(grid: Grid, v_hat: np.ndarray) -> np.ndarray:
    """I - xi xi^T / |xi|^2 on spectral vectors; modes with zero derivative wavenumber pass through"""
    xi = grid.derivative_wavenumbers
    norm_sq = np.sum(xi ** 2, axis=0)
    safe = np.where(norm_sq > 0.0, norm_sq, 1.0)
    longitudinal = np.sum(xi * v_hat, axis=0) / safe
    return v_hat - xi * longitudinal


def leray_project(v: VectorField) -> VectorField:
    return VectorField.from_hat(v.grid, leray_hat(v.grid, v.hat))


def friedrichs_mask(grid: Grid, n: int) -> np.ndarray:
    if n < 1:
        raise ConfigurationError(f"Friedrichs index must be >= 1, got {n}")
    xi = grid.xi_norm
    return ((xi >= 1.0 / n) & (xi <= n)).astype(np.float64)


def friedrichs_project(f: F, n: int) -> F:
    """J_n: keep Fourier modes with 1/n <= |xi| <= n"""
    return apply_multiplier(f, friedrichs_mask(f.grid, n))


def vorticity_tensor(u: VectorField) -> TensorField:
    grad = velocity_gradient(u)
    return TensorField(u.grid, 0.5 * (grad.values - np.swapaxes(grad.values, 0, 1)))


def deformation_tensor(u: VectorField) -> TensorField:
    grad = velocity_gradient(u)
    return TensorField(u.grid, 0.5 * (grad.values + np.swapaxes(grad.values, 0, 1)))


def dealias(f: F) -> F:
    """2/3 rule: zero every mode with some |k_i| > N/3"""
    return apply_multiplier(f, f.grid.dealias_mask.astype(np.float64))


def lp_norm(f: GridArray, p: float) -> float:
    """Trapezoid quadrature of the L^p norm of the pointwise magnitude"""
    if p < 1:
        raise ConfigurationError(f"L^p exponent must be >= 1, got {p}")
    mag = f.magnitude()
    if np.isinf(p):
        return float(np.max(mag))
    return float((np.sum(mag ** p) * f.grid.cell_volume) ** (1.0 / p))


def l2_norm(f: GridArray) -> float:
    return lp_norm(f, 2.0)


def parseval_l2_norm(f: GridArray) -> float:
    """L^2 norm computed from spectral coefficients"""
    grid = f.grid
    total = np.sum(np.abs(f.hat) ** 2)
    return float(np.sqrt(grid.volume * total) / grid.N ** grid.d)


def inner(f: GridArray, g: GridArray) -> float:
    """L^2 inner product with full contraction over components"""
    return float(np.sum(f.values * g.values) * f.grid.cell_volume)
