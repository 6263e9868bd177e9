"""Periodic-grid spectral representation of scalar and vector fields.

Fields are stored as half-spectrum (``rfftn``) coefficients normalised so that
the zero-wavevector coefficient equals the spatial mean of the field::

    c(k) = N**-n * sum_x f(x) exp(-i k.x)

so ``integral f dx = L**n * c(0)`` and ``f(x) = sum_k c(k) exp(i k.x)``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from ._validation import ConfigurationError, GridMismatchError

__all__ = [
    "Grid",
    "ScalarField",
    "SpectralVectorField",
    "make_grid",
    "to_spectral",
    "from_spectral",
    "gradient",
    "divergence",
    "laplacian",
    "advect",
    "dealias",
    "lq_norm",
    "lq_norm_physical",
    "mean_integral",
    "l2_norm_spectral",
    "fft_workers",
]


def fft_workers() -> int:
    """Thread count for transforms (``TEMAM_NUM_THREADS`` overrides)."""
    env = os.environ.get("TEMAM_NUM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return -1


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic grid on the box ``[0, L)**n``.

    Wavevectors are ``k = (2 pi / L) m`` with integer ``m`` in ``[-N/2, N/2)``
    on every axis except the last, which holds ``0..N/2`` (real-to-complex
    layout).
    """

    n_dims: int
    box_length: float
    resolution: int

    def __post_init__(self):
        if self.n_dims not in (2, 3):
            raise ConfigurationError(f"n_dims must be 2 or 3, got {self.n_dims}")
        if int(self.resolution) != self.resolution or self.resolution < 8 or self.resolution % 2:
            raise ConfigurationError(
                f"resolution must be an even integer >= 8, got {self.resolution}"
            )
        if not self.box_length > 0:
            raise ConfigurationError(f"box_length must be positive, got {self.box_length}")

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.n_dims, self.box_length, self.resolution) == (
            other.n_dims,
            other.box_length,
            other.resolution,
        )

    def __hash__(self):
        return hash((self.n_dims, self.box_length, self.resolution))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.resolution,) * self.n_dims

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.resolution,) * (self.n_dims - 1) + (self.resolution // 2 + 1,)

    @property
    def dx(self) -> float:
        return self.box_length / self.resolution

    @property
    def cell_volume(self) -> float:
        return self.dx**self.n_dims

    @property
    def volume(self) -> float:
        return self.box_length**self.n_dims

    @property
    def n_points(self) -> int:
        return self.resolution**self.n_dims

    @cached_property
    def mode_indices(self) -> tuple[np.ndarray, ...]:
        """Integer multi-index arrays, broadcastable to ``spectral_shape``."""
        N = self.resolution
        full = np.fft.fftfreq(N, 1.0 / N)
        half = np.arange(N // 2 + 1, dtype=float)
        out = []
        for axis in range(self.n_dims):
            m = half if axis == self.n_dims - 1 else full
            shape = [1] * self.n_dims
            shape[axis] = m.size
            out.append(m.reshape(shape))
        return tuple(out)

    @cached_property
    def k(self) -> tuple[np.ndarray, ...]:
        scale = 2.0 * np.pi / self.box_length
        return tuple(scale * m for m in self.mode_indices)

    @cached_property
    def kd(self) -> tuple[np.ndarray, ...]:
        """Wavevectors for odd derivatives: Nyquist components set to zero."""
        N = self.resolution
        out = []
        for m, k in zip(self.mode_indices, self.k):
            out.append(np.where(np.abs(m) == N // 2, 0.0, k))
        return tuple(out)

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(np.broadcast_to(k, self.spectral_shape) ** 2 for k in self.k)

    @cached_property
    def kd2(self) -> np.ndarray:
        return sum(np.broadcast_to(k, self.spectral_shape) ** 2 for k in self.kd)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep ``|m_j| <= (N - 1) // 3`` on every axis."""
        cutoff = (self.resolution - 1) // 3
        mask = np.ones(self.spectral_shape, dtype=bool)
        for m in self.mode_indices:
            mask &= np.abs(m) <= cutoff
        return mask

    @cached_property
    def hermitian_weights(self) -> np.ndarray:
        """Multiplicity of each stored half-spectrum mode in the full spectrum."""
        N = self.resolution
        w = np.full(N // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        shape = [1] * (self.n_dims - 1) + [N // 2 + 1]
        return np.broadcast_to(w.reshape(shape), self.spectral_shape)

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Physical sample coordinates ``x_j = j * dx`` (``ij`` indexing)."""
        x = np.arange(self.resolution) * self.dx
        return tuple(np.meshgrid(*([x] * self.n_dims), indexing="ij"))

    def centered_coordinates(self) -> tuple[np.ndarray, ...]:
        """Coordinates wrapped into ``[-L/2, L/2)``; the origin is sample 0."""
        N = self.resolution
        x = np.fft.fftfreq(N, 1.0 / N) * self.dx
        return tuple(np.meshgrid(*([x] * self.n_dims), indexing="ij"))

    def smallest_wavenumber(self) -> float:
        return 2.0 * np.pi / self.box_length

    def to_dict(self) -> dict:
        return {
            "n_dims": self.n_dims,
            "box_length": self.box_length,
            "resolution": self.resolution,
        }


def make_grid(n_dims: int, box_length: float, resolution: int) -> Grid:
    return Grid(int(n_dims), float(box_length), int(resolution))


class _FieldOps:
    """Linear-space arithmetic shared by scalar and vector fields."""

    grid: Grid
    coeffs: np.ndarray

    def _check(self, other):
        if type(other) is not type(self):
            return NotImplemented
        if other.grid != self.grid:
            raise GridMismatchError("fields live on different grids")
        return other

    def __add__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return type(self)(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return type(self)(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return type(self)(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return type(self)(self.grid, -self.coeffs)

    def __truediv__(self, scalar):
        return type(self)(self.grid, self.coeffs / scalar)

    def copy(self):
        return type(self)(self.grid, self.coeffs.copy())

    def zero_mode(self) -> np.ndarray:
        idx = (...,) + (0,) * self.grid.n_dims
        return self.coeffs[idx]

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        """True if the stored coefficients describe a real physical field."""
        back = _forward(_inverse(self.coeffs, self.grid), self.grid)
        scale = max(np.max(np.abs(self.coeffs)), np.finfo(float).tiny)
        return bool(np.max(np.abs(back - self.coeffs)) <= rtol * scale)


@dataclass(frozen=True, eq=False)
class ScalarField(_FieldOps):
    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.coeffs.shape != self.grid.spectral_shape:
            raise GridMismatchError(
                f"coefficient shape {self.coeffs.shape} != {self.grid.spectral_shape}"
            )

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.spectral_shape, dtype=complex))


@dataclass(frozen=True, eq=False)
class SpectralVectorField(_FieldOps):
    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        expected = (self.grid.n_dims,) + self.grid.spectral_shape
        if self.coeffs.shape != expected:
            raise GridMismatchError(f"coefficient shape {self.coeffs.shape} != {expected}")

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralVectorField":
        return cls(grid, np.zeros((grid.n_dims,) + grid.spectral_shape, dtype=complex))

    @property
    def n_components(self) -> int:
        return self.coeffs.shape[0]

    def component(self, j: int) -> ScalarField:
        return ScalarField(self.grid, self.coeffs[j])

    @classmethod
    def from_components(cls, components) -> "SpectralVectorField":
        components = list(components)
        grid = components[0].grid
        for c in components:
            if c.grid != grid:
                raise GridMismatchError("components live on different grids")
        return cls(grid, np.stack([c.coeffs for c in components]))


def _axes(grid: Grid) -> tuple[int, ...]:
    return tuple(range(-grid.n_dims, 0))


def _forward(values: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.rfftn(values, axes=_axes(grid), norm="forward", workers=fft_workers())


def _inverse(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.irfftn(
        coeffs, s=grid.shape, axes=_axes(grid), norm="forward", workers=fft_workers()
    )


def to_spectral(values, grid: Grid):
    """Transform physical samples to a spectral field.

    An array of shape ``grid.shape`` gives a :class:`ScalarField`; shape
    ``(n_dims,) + grid.shape`` gives a :class:`SpectralVectorField`.
    """
    values = np.asarray(values, dtype=float)
    if values.shape == grid.shape:
        return ScalarField(grid, _forward(values, grid))
    if values.shape == (grid.n_dims,) + grid.shape:
        return SpectralVectorField(grid, _forward(values, grid))
    raise GridMismatchError(f"sample shape {values.shape} does not match grid {grid.shape}")


def from_spectral(f) -> np.ndarray:
    """Physical samples of a scalar or vector field."""
    return _inverse(f.coeffs, f.grid)


def gradient(f: ScalarField) -> SpectralVectorField:
    g = f.grid
    return SpectralVectorField(g, np.stack([1j * k * f.coeffs for k in g.kd]))


def divergence(u: SpectralVectorField) -> ScalarField:
    g = u.grid
    return ScalarField(g, sum(1j * k * u.coeffs[j] for j, k in enumerate(g.kd)))


def laplacian(f):
    return type(f)(f.grid, -f.grid.k2 * f.coeffs)


def dealias(f):
    return type(f)(f.grid, f.coeffs * f.grid.dealias_mask)


def _velocity_gradient(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    """Physical ``d_j u_i`` as an array indexed ``[i, j, ...]``."""
    n = grid.n_dims
    dcoef = np.empty((n, n) + grid.spectral_shape, dtype=complex)
    for j, k in enumerate(grid.kd):
        dcoef[:, j] = 1j * k * coeffs
    return _inverse(dcoef, grid)


def advect(u: SpectralVectorField, v: SpectralVectorField, dealiased: bool = True):
    """Pseudospectral ``u . grad v`` with the 2/3 rule applied around the product."""
    if u.grid != v.grid:
        raise GridMismatchError("advect: fields live on different grids")
    g = u.grid
    mask = g.dealias_mask if dealiased else True
    u_phys = _inverse(u.coeffs * mask, g)
    dv = _velocity_gradient(v.coeffs * mask, g)
    prod = np.einsum("j...,ij...->i...", u_phys, dv)
    return SpectralVectorField(g, _forward(prod, g) * mask)


def lq_norm_physical(values: np.ndarray, grid: Grid, q: float) -> float:
    """Riemann-sum L^q norm of samples; vector samples use the pointwise Euclidean norm."""
    values = np.asarray(values)
    if values.shape != grid.shape:
        values = np.sqrt(np.sum(values**2, axis=tuple(range(values.ndim - grid.n_dims))))
    else:
        values = np.abs(values)
    q = float(q)
    if q < 1:
        raise ValueError(f"q must lie in [1, inf], got {q}")
    if np.isinf(q):
        return float(values.max())
    if q == 1:
        return float(values.sum() * grid.cell_volume)
    if q == 2:
        return float(np.sqrt(np.sum(values * values) * grid.cell_volume))
    vmax = values.max()
    if vmax == 0:
        return 0.0
    return float(vmax * (np.sum((values / vmax) ** q) * grid.cell_volume) ** (1.0 / q))


def lq_norm(f, q: float) -> float:
    return lq_norm_physical(from_spectral(f), f.grid, q)


def l2_norm_spectral(f) -> float:
    """L^2 norm through Parseval: ``||f||^2 = L^n sum_k |c_k|^2``."""
    g = f.grid
    w = g.hermitian_weights
    a = np.abs(f.coeffs) ** 2
    total = np.sum(a * w)
    return float(np.sqrt(g.volume * total))


def mean_integral(u) -> np.ndarray:
    """``integral u dx`` per component (``L**n`` times the zero coefficient)."""
    return np.real(u.zero_mode()) * u.grid.volume
