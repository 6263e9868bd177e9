"""Fourier-side semigroups: the artificial-compressibility kernel, heat flow, Helmholtz split.

The kernel symbol is

    M(xi, t) = e^{-t|xi|^2} P(xi) + e^{-t(1+1/eps)|xi|^2} Q(xi),
    Q = xi xi^T / |xi|^2,  P = I - Q,

i.e. the solenoidal part diffuses at unit rate and the gradient part at rate
``1 + 1/eps``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import DomainError, check_nonnegative, check_positive
from .spectral import Grid, ScalarField, SpectralVectorField, _inverse

__all__ = [
    "relative_phi1",
    "m_epsilon_symbol",
    "apply_m_epsilon",
    "apply_heat",
    "apply_heat_rate",
    "HelmholtzSplit",
    "helmholtz",
    "leray_project",
    "materialize_kernel",
    "heat_kernel_field",
    "SERIES_THRESHOLD",
]

SERIES_THRESHOLD = 1e-4


def relative_phi1(r):
    """``(1 - e^{-r}) / r`` with a Taylor series for ``|r| < 1e-4``."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    small = np.abs(r) < SERIES_THRESHOLD
    rs = r[small]
    out[small] = 1.0 - rs / 2.0 + rs * rs / 6.0 - rs**3 / 24.0
    rb = r[~small]
    out[~small] = -np.expm1(-rb) / rb
    return out


def m_epsilon_symbol(xi, t: float, eps: float) -> np.ndarray:
    """Kernel symbol at a single wavevector ``xi`` as a symmetric ``n x n`` matrix."""
    check_nonnegative("t", t)
    check_positive("eps", eps)
    xi = np.asarray(xi, dtype=float)
    n = xi.size
    s = float(xi @ xi)
    # Q (1 - e^{-r}) = xi xi^T (t/eps) phi(r) with r = t |xi|^2 / eps
    r = t * s / eps
    corr = (t / eps) * relative_phi1(r)
    return np.exp(-t * s) * (np.eye(n) - np.outer(xi, xi) * corr)


def _kd_dot(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    return sum(k * coeffs[j] for j, k in enumerate(grid.kd))


def _gradient_projection(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    """``Q u`` with ``Q = kd kd^T / |kd|^2`` (zero where ``kd = 0``)."""
    kd2 = grid.kd2
    inv = np.divide(1.0, kd2, out=np.zeros_like(kd2), where=kd2 > 0)
    proj = _kd_dot(coeffs, grid) * inv
    return np.stack([k * proj for k in grid.kd])


def _damping(grid: Grid, t: float, eps: float) -> np.ndarray:
    """``1 - e^{-t|k|^2/eps}`` evaluated as ``r * phi(r)``."""
    r = t * grid.k2 / eps
    return r * relative_phi1(r.ravel()).reshape(r.shape)


def apply_m_epsilon(u: SpectralVectorField, t: float, eps: float) -> SpectralVectorField:
    check_nonnegative("t", t)
    check_positive("eps", eps)
    g = u.grid
    q = _gradient_projection(u.coeffs, g)
    return SpectralVectorField(g, np.exp(-t * g.k2) * (u.coeffs - _damping(g, t, eps) * q))


def apply_heat(f, t: float):
    """Heat semigroup ``e^{t Delta}`` on a scalar or vector field."""
    check_nonnegative("t", t)
    return type(f)(f.grid, f.coeffs * np.exp(-t * f.grid.k2))


def apply_heat_rate(f, t: float, rate: float):
    """``e^{rate t Delta}``; used for the divergence identity."""
    check_nonnegative("t", t)
    return type(f)(f.grid, f.coeffs * np.exp(-rate * t * f.grid.k2))


@dataclass(frozen=True)
class HelmholtzSplit:
    solenoidal: SpectralVectorField
    gradient_part: SpectralVectorField

    def reconstruct(self) -> SpectralVectorField:
        return self.solenoidal + self.gradient_part


def helmholtz(u: SpectralVectorField) -> HelmholtzSplit:
    """Split into divergence-free and gradient parts; the zero mode stays solenoidal."""
    q = _gradient_projection(u.coeffs, u.grid)
    return HelmholtzSplit(
        SpectralVectorField(u.grid, u.coeffs - q),
        SpectralVectorField(u.grid, q),
    )


def leray_project(u: SpectralVectorField) -> SpectralVectorField:
    return helmholtz(u).solenoidal


def materialize_kernel(grid: Grid, t: float, eps: float) -> np.ndarray:
    """Physical samples of the kernel, shape ``(n, n) + grid.shape``.

    Sample ``[k, l, x]`` approximates ``M_kl(x, t)`` on the whole space, with
    ``x`` measured from the origin at sample 0 (periodic wrap).
    """
    check_positive("eps", eps)
    if not t > 0:
        raise DomainError("the kernel at t = 0 is a distribution; need t > 0")
    n = grid.n_dims
    heat = np.exp(-t * grid.k2)
    kd2 = grid.kd2
    inv = np.divide(1.0, kd2, out=np.zeros_like(kd2), where=kd2 > 0)
    corr = heat * _damping(grid, t, eps) * inv
    coeffs = np.empty((n, n) + grid.spectral_shape, dtype=complex)
    for a in range(n):
        for b in range(n):
            entry = -grid.kd[a] * grid.kd[b] * corr
            if a == b:
                entry = entry + heat
            coeffs[a, b] = entry / grid.volume
    return _inverse(coeffs, grid)


def heat_kernel_field(grid: Grid, t: float) -> ScalarField:
    """Exactly periodised Gaussian ``E(., t)``: coefficients ``e^{-t|k|^2} / L^n``."""
    check_nonnegative("t", t)
    return ScalarField(grid, (np.exp(-t * grid.k2) / grid.volume).astype(complex))
