"""The explicit three-dimensional datum whose limit mean is nonzero at third order.

The datum is ``u0 = eta (-d2^2 E, d1 d2 E, 0)(x, 1)`` with ``E`` the heat
kernel.  For small ``eta`` the limit mean is ``eta^3 L3(eps)`` in its first
component; ``L3`` reduces to a smooth double integral over ``0 < tau < s``.

Fourier transforms use ``F[g](xi) = int g(x) e^{-i x.xi} dx``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ._validation import ConfigurationError, QuadratureError, check_positive
from .quadrature import QuadratureResult, adaptive_triangle, gauss_hermite_3d, tensor_triangle
from .spectral import Grid, SpectralVectorField, _forward, _inverse, _velocity_gradient

__all__ = [
    "KAPPA",
    "PLANCHEREL_FACTOR",
    "ExampleParams",
    "tail_bound",
    "suggested_box_length",
    "build_example_datum",
    "rhs_symbol",
    "rhs_pseudospectral",
    "rhs_calibration",
    "xi_integral_closed_form",
    "xi_integral_quadrature",
    "t3_integrand",
    "t3_first_component",
    "t3_first_component_tensor",
    "t3_limit",
    "perturbative_prediction",
    "example_report",
]

KAPPA = math.sqrt(2.0) / (512.0 * math.pi**1.5)
# int a b dx = (2 pi)^{-3} int a^ b^* dxi, and int T3 = (1/2) int_0^t int v1 . div T2
PLANCHEREL_FACTOR = 0.5 / (2.0 * math.pi) ** 3

TAIL_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ExampleParams:
    eta: float
    eps: float = 1.0
    t_horizon: float = 16.0

    def __post_init__(self):
        check_positive("eta", self.eta)
        check_positive("eps", self.eps)
        check_positive("t_horizon", self.t_horizon)


def tail_bound(box_length: float) -> float:
    """Bound on ``|d^2 E(x, 1)|`` at ``|x| = L/2``."""
    r = 0.5 * box_length
    return (4.0 * math.pi) ** -1.5 * (0.5 + r * r / 4.0) * math.exp(-r * r / 4.0)


def suggested_box_length(tol: float = TAIL_TOLERANCE) -> float:
    L = 8.0
    while tail_bound(L) >= tol:
        L += 1.0
    return L


def build_example_datum(grid: Grid, eta: float) -> SpectralVectorField:
    """Datum built from the Gaussian symbol ``e^{-|k|^2}`` with derivative multipliers ``i k``."""
    if grid.n_dims != 3:
        raise ConfigurationError("the example datum lives in three dimensions")
    if tail_bound(grid.box_length) >= TAIL_TOLERANCE:
        raise ConfigurationError(
            f"box length {grid.box_length} leaves a Gaussian tail above {TAIL_TOLERANCE:g}; "
            f"use L >= {suggested_box_length():g}"
        )
    k1, k2 = grid.kd[0], grid.kd[1]
    gauss = np.exp(-grid.k2) / grid.volume
    coeffs = np.zeros((3,) + grid.spectral_shape, dtype=complex)
    coeffs[0] = eta * k2 * k2 * gauss
    coeffs[1] = -eta * k1 * k2 * gauss
    return SpectralVectorField(grid, coeffs)


def rhs_symbol(xi, tau: float) -> np.ndarray:
    """``F[div(v1 . grad v1)](xi)`` at time ``tau`` for ``eta = 1``; ``xi`` has last axis of length 3."""
    xi = np.asarray(xi, dtype=float)
    x1, x2 = xi[..., 0], xi[..., 1]
    s = np.sum(xi * xi, axis=-1)
    a = tau + 1.0
    poly = (x1 * x1 * x2 * x2 + x2**4) * a - 3.0 * x1 * x1 - x2 * x2
    return KAPPA * poly * np.exp(-a * s / 2.0) / a**3.5


def rhs_pseudospectral(grid: Grid, tau: float) -> np.ndarray:
    """Grid transform of ``div(v1 . grad v1)(tau)`` scaled to the continuous convention (times ``L^3``).

    ``v1(tau) = e^{tau Delta} v0``; no dealiasing so the product is exact on
    well-resolved data.
    """
    v0 = build_example_datum(grid, 1.0)
    v1 = v0.coeffs * np.exp(-tau * grid.k2)
    phys = _inverse(v1, grid)
    grads = _velocity_gradient(v1, grid)
    adv = np.einsum("j...,ij...->i...", phys, grads)
    adv_hat = _forward(adv, grid)
    div = sum(1j * grid.kd[j] * adv_hat[j] for j in range(3))
    return div * grid.volume


@dataclass(frozen=True)
class Calibration:
    ratio: float
    spread: float
    n_modes: int

    def to_dict(self) -> dict:
        return {"ratio": self.ratio, "spread": self.spread, "n_modes": self.n_modes}


def rhs_calibration(grid: Grid, taus=(0.0, 0.5, 1.0), rel_floor: float = 1e-3) -> Calibration:
    """Ratio ``rhs_symbol / oracle`` over unaliased modes where the oracle is above ``rel_floor`` of its peak.

    ``spread`` is ``(max - min) / |median|`` of the ratio.
    """
    ratios = []
    xi = np.stack(np.broadcast_arrays(*grid.k), axis=-1)
    for tau in taus:
        oracle = rhs_pseudospectral(grid, tau)
        if np.max(np.abs(oracle.imag)) > 1e-10 * np.max(np.abs(oracle)):
            raise ConfigurationError("pseudospectral transform is not real; check resolution")
        sym = rhs_symbol(xi, tau)
        sel = grid.dealias_mask & (np.abs(oracle.real) > rel_floor * np.max(np.abs(oracle.real)))
        ratios.append(sym[sel] / oracle.real[sel])
    r = np.concatenate(ratios)
    med = float(np.median(r))
    return Calibration(med, float((r.max() - r.min()) / abs(med)), int(r.size))


def xi_integral_closed_form(lambda_: float, tau: float) -> float:
    """``int e^{-lambda |xi|^2} xi2^2 ((xi1^2 xi2^2 + xi2^4)(tau+1) - 3 xi1^2 - xi2^2) d xi``."""
    if not lambda_ > 0:
        raise ValueError(f"lambda_ must be positive, got {lambda_}")
    return -(3.0 * math.pi**1.5 / (4.0 * lambda_**4.5)) * (2.0 * lambda_ - 3.0 * tau - 3.0)


def xi_integral_quadrature(lambda_: float, tau: float) -> QuadratureResult:
    def poly(x, y, z):
        return y * y * ((x * x * y * y + y**4) * (tau + 1.0) - 3.0 * x * x - y * y)

    return gauss_hermite_3d(poly, lambda_)


def t3_integrand(s, tau, eps: float):
    """Integrand over ``0 < tau < s``; nonnegative there."""
    lam = (s - tau) * (1.0 + 1.0 / eps) + s + (tau + 3.0) / 2.0
    return KAPPA * (3.0 * math.pi**1.5 / 4.0) * (2.0 * lam - 3.0 * tau - 3.0) / (lam**4.5 * (tau + 1.0) ** 3.5)


def t3_first_component(t: float, eps: float, tol: float = 1e-10) -> QuadratureResult:
    """Adaptive double integral of :func:`t3_integrand` over ``0 < tau < s < t``."""
    if not t >= 0:
        raise ValueError(f"t must be non-negative, got {t}")
    check_positive("eps", eps)
    check_positive("tol", tol)
    res = adaptive_triangle(lambda s, tau: t3_integrand(s, tau, eps), t, tol)
    if res.abs_error_estimate > tol:
        raise QuadratureError(f"error estimate {res.abs_error_estimate:.2e} above tol {tol:.2e}")
    return res


def t3_first_component_tensor(t: float, eps: float, order: int = 60) -> QuadratureResult:
    """Independent fixed-rule evaluation of :func:`t3_first_component`."""
    return tensor_triangle(lambda s, tau: t3_integrand(s, tau, eps), t, order=order, panels=12)


def t3_limit(eps: float, tol: float = 1e-9, t_start: float = 1.0, max_doublings: int = 40) -> QuadratureResult:
    """``lim_{t -> inf}`` of :func:`t3_first_component` by doubling ``t``.

    Stops once the increment is below ``tol`` and adds the geometric tail
    ``d r / (1 - r)`` with ``r`` the ratio of the last two increments.
    """
    check_positive("eps", eps)
    t = t_start
    prev = t3_first_component(t, eps, tol / 10.0)
    evals = prev.evaluations
    last_inc = None
    for _ in range(max_doublings):
        t *= 2.0
        cur = t3_first_component(t, eps, tol / 10.0)
        evals += cur.evaluations
        inc = cur.value - prev.value
        if inc < tol and last_inc is not None and last_inc > 0:
            r = inc / last_inc
            tail = inc * r / (1.0 - r) if 0 <= r < 1 else 0.0
            return QuadratureResult(cur.value + tail, abs(tail) + cur.abs_error_estimate + inc, evals)
        last_inc, prev = inc, cur
    raise QuadratureError(f"t3 limit did not converge after {max_doublings} doublings")


def perturbative_prediction(eta: float, eps: float, L3: float | None = None, calibration: float = 1.0) -> np.ndarray:
    """``(eta^3 c L3(eps), 0, 0)`` with ``c`` the Plancherel factor times ``calibration``.

    ``calibration`` is applied only when it differs from 1 by more than 1e-3.
    """
    if eta == 0:
        return np.zeros(3)
    if L3 is None:
        L3 = t3_limit(eps).value
    cal = calibration if abs(calibration - 1.0) > 1e-3 else 1.0
    return np.array([eta**3 * PLANCHEREL_FACTOR * cal * L3, 0.0, 0.0])


def example_report(
    eps: float,
    eta: float,
    L3: float,
    calibration_ratio: float,
    measured_lambda=None,
) -> dict:
    """Report dict with keys ``eps, eta, L3, calibration_ratio, predicted_lambda, measured_lambda, relative_error``."""
    predicted = perturbative_prediction(eta, eps, L3, calibration_ratio)
    rel = None
    if measured_lambda is not None:
        measured_lambda = [float(v) for v in measured_lambda]
        rel = abs(measured_lambda[0] - predicted[0]) / abs(predicted[0]) if predicted[0] else None
    return {
        "eps": float(eps),
        "eta": float(eta),
        "L3": float(L3),
        "calibration_ratio": float(calibration_ratio),
        "predicted_lambda": [float(v) for v in predicted],
        "measured_lambda": measured_lambda,
        "relative_error": rel,
    }


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
