"""Long-time diagnostics: the limit mean vector, decay exponents and heat-kernel profiles."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import ConfigurationError, QuadratureError, check_q
from .kernels import apply_heat, apply_m_epsilon
from .solver import ExponentialPropagator, Trajectory
from .spectral import Grid, ScalarField, SpectralVectorField, _inverse, lq_norm, lq_norm_physical

logger = logging.getLogger(__name__)

__all__ = [
    "LambdaEstimate",
    "DecayFit",
    "ProfileReport",
    "LinearProfileReport",
    "mean_series",
    "lambda_from_mean",
    "lambda_from_duhamel",
    "decay_exponent",
    "validity_limit",
    "decay_fit",
    "DecayExponentRegressor",
    "heat_profile",
    "profile_residual",
    "verify_linear_profile",
    "richardson_tail",
]


def decay_exponent(n_dims: int, q: float) -> float:
    """``(n/2)(1 - 1/q)``."""
    q = check_q(q)
    return 0.5 * n_dims * (1.0 - (0.0 if math.isinf(q) else 1.0 / q))


def validity_limit(box_length: float, spread: float = 1.0) -> float:
    """Largest time for whole-space asymptotics on the box: ``0.1 (L / (2 spread))^2``."""
    return 0.1 * (box_length / (2.0 * spread)) ** 2


@dataclass
class LambdaEstimate:
    value: np.ndarray
    route: str
    convergence_diagnostic: float
    t_window: tuple[float, float]
    converged: bool = True
    raw_value: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "value": [float(v) for v in self.value],
            "route": self.route,
            "convergence_diagnostic": float(self.convergence_diagnostic),
            "t_window": [float(t) for t in self.t_window],
            "converged": bool(self.converged),
            "raw_value": None if self.raw_value is None else [float(v) for v in self.raw_value],
        }


def mean_series(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """``(t, int u(t) dx)`` pairs; the second array has shape ``(n_times, n_dims)``."""
    return traj.times.copy(), traj.means


def _interp(times, values, t):
    return np.array([np.interp(t, times, values[:, j]) for j in range(values.shape[1])]).T


def richardson_tail(times, values, order: float | str = 1.0, min_slope: float = -0.25):
    """Extrapolate ``m(t) -> m(inf)`` from the tail of a sampled series.

    Uses ``m(T) + (m(T) - m(T/2)) / (2^p - 1)``; ``p = 1`` is one Richardson
    level in ``1/t``.  With ``order='auto'`` the exponent is the measured
    decay rate of ``|m(t) - m(2t)|``.  Returns ``(value, slope, converged)``
    where ``slope`` is the log-log slope of ``|m(t) - m(2t)|`` over the last
    decade (``-inf`` for an exactly constant tail).
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    T = times[-1]
    t_lo = T / 20.0
    if times[0] > t_lo:
        t_lo = times[0]
    probe = np.geomspace(max(t_lo, T / 20.0), T / 2.0, 8)
    diffs = np.linalg.norm(_interp(times, values, 2 * probe) - _interp(times, values, probe), axis=1)
    scale = max(float(np.max(np.abs(values[-1]))), np.finfo(float).tiny)
    tiny = diffs <= 1e-14 * scale
    if np.all(tiny):
        slope = -math.inf
    else:
        good = ~tiny
        if good.sum() >= 2:
            slope = float(np.polyfit(np.log(probe[good]), np.log(diffs[good]), 1)[0])
        else:
            slope = -math.inf
    m_T = values[-1]
    m_half = _interp(times, values, np.array([T / 2.0]))[0]
    if math.isinf(slope):
        return m_T.copy(), slope, True
    p = float(order) if order != "auto" else min(max(-slope, 0.25), 4.0)
    extrapolated = m_T + (m_T - m_half) / (2.0**p - 1.0)
    return extrapolated, slope, slope < min_slope


def lambda_from_mean(series, order: float | str = 1.0) -> LambdaEstimate:
    """Limit of ``int u dx`` from a mean series ``(times, means)`` or a :class:`Trajectory`."""
    if isinstance(series, Trajectory):
        times, values = mean_series(series)
    else:
        times, values = series
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    positive = times[times > 0]
    if positive.size == 0 or times[-1] / positive[0] < 10.0:
        raise ConfigurationError("the mean series must cover at least one decade of time")
    value, slope, ok = richardson_tail(times, values, order)
    if not ok:
        logger.warning("mean series tail has not converged (slope %.3g)", slope)
    return LambdaEstimate(value, "mean-limit", slope, (times[-1] / 20.0, times[-1]), ok, values[-1].copy())


def lambda_from_duhamel(
    traj: Trajectory, rule: str = "scheme", order: float | str = 1.0
) -> LambdaEstimate:
    """Time integral of ``-int f dx`` with ``f = u.grad u + (1/2) u div u``.

    ``rule='scheme'`` sums the integrator's own per-step quadrature of the
    nonlinearity's zero mode; ``rule='trapezoid'`` integrates the recorded
    rate ``(1/2) int u div u`` with the trapezoid rule on the record times.
    """
    n = traj.grid.n_dims
    if rule == "scheme":
        keys = [f"duhamel_mean_{j + 1}" for j in range(n)]
        if any(k not in traj.records for k in keys):
            raise ConfigurationError("trajectory did not store the nonlinearity zero mode")
        values = np.stack([traj.records[k] for k in keys], axis=1)
    elif rule == "trapezoid":
        keys = [f"drift_{j + 1}" for j in range(n)]
        if any(k not in traj.records for k in keys):
            raise ConfigurationError("trajectory did not store the mean drift rate")
        rates = np.stack([traj.records[k] for k in keys], axis=1)
        dt = np.diff(traj.times)[:, None]
        values = np.concatenate(
            [np.zeros((1, n)), np.cumsum(0.5 * dt * (rates[1:] + rates[:-1]), axis=0)]
        )
    else:
        raise ValueError(f"unknown rule {rule!r}")
    value, slope, ok = richardson_tail(traj.times, values, order)
    return LambdaEstimate(
        value, "duhamel-integral", slope, (traj.times[-1] / 20.0, traj.times[-1]), ok, values[-1].copy()
    )


@dataclass
class DecayFit:
    q: float
    fitted_exponent: float
    predicted_exponent: float
    window: tuple[float, float]
    residual: float
    n_samples: int
    skipped: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["q"] = "inf" if math.isinf(self.q) else self.q
        d["window"] = list(self.window)
        return d


class DecayExponentRegressor(RegressorMixin, BaseEstimator):
    """Least-squares power law ``y = C t^{-p}`` fitted in log-log coordinates."""

    def __init__(self, window=None):
        self.window = window

    def fit(self, t, y):
        t = np.asarray(t, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if t.shape != y.shape:
            raise ValueError("t and y must have the same length")
        keep = (t > 0) & (y > 0) & np.isfinite(y)
        if self.window is not None:
            lo, hi = self.window
            keep &= (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
        if keep.sum() < 2:
            raise ValueError("need at least two positive samples inside the window")
        lt, ly = np.log(t[keep]), np.log(y[keep])
        slope, intercept = np.polyfit(lt, ly, 1)
        self.exponent_ = -float(slope)
        self.coefficient_ = float(np.exp(intercept))
        self.residual_ = float(np.sqrt(np.mean((ly - (slope * lt + intercept)) ** 2)))
        self.n_samples_ = int(keep.sum())
        return self

    def predict(self, t):
        check_is_fitted(self, "exponent_")
        return self.coefficient_ * np.asarray(t, dtype=float) ** (-self.exponent_)


_RECORD_FOR_Q = {1.0: "l1", 2.0: "l2", math.inf: "linf"}


def _norm_series(traj: Trajectory, q: float) -> tuple[np.ndarray, np.ndarray]:
    key = _RECORD_FOR_Q.get(q)
    if key is not None and key in traj.records and np.all(np.isfinite(traj.records[key])):
        return traj.times, np.asarray(traj.records[key])
    if not traj.snapshots:
        raise ConfigurationError(f"no records or snapshots available for q={q}")
    ts = traj.snapshot_times
    return ts, np.array([lq_norm(traj.snapshots[t], q) for t in ts])


def decay_fit(
    traj: Trajectory,
    q: float,
    window: tuple[float, float] | None = None,
    spread: float = 1.0,
    min_samples: int = 8,
) -> DecayFit:
    """Fit ``||u(t)||_q ~ t^{-p}`` over ``window`` (default ``[t_end/10, t_end]``).

    The window is clipped to :func:`validity_limit`.  An identically zero
    trajectory gives a skipped fit with exponent ``nan``.
    """
    q = check_q(q)
    n = traj.grid.n_dims
    t, y = _norm_series(traj, q)
    predicted = decay_exponent(n, q)
    if window is None:
        window = (t[-1] / 10.0, t[-1])
    t_valid = validity_limit(traj.grid.box_length, spread)
    window = (float(window[0]), float(min(window[1], t_valid)))
    if window[1] <= window[0]:
        raise ConfigurationError(
            f"fit window {window} lies outside the periodisation validity limit {t_valid:.3g}"
        )
    inside = (t >= window[0] * (1 - 1e-12)) & (t <= window[1] * (1 + 1e-12))
    if np.all(y[inside] == 0):
        return DecayFit(q, math.nan, predicted, window, 0.0, int(inside.sum()), skipped=True)
    if inside.sum() < min_samples:
        raise ConfigurationError(f"only {int(inside.sum())} samples inside the fit window {window}")
    reg = DecayExponentRegressor(window=window).fit(t, y)
    return DecayFit(q, reg.exponent_, predicted, window, reg.residual_, reg.n_samples_)


def _delta_coeffs(grid: Grid, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    return (lam.reshape((-1,) + (1,) * grid.n_dims) / grid.volume) * np.ones(grid.spectral_shape, dtype=complex)


def heat_profile(grid: Grid, lam, t: float) -> SpectralVectorField:
    """``lam * E(., t)`` with the exactly periodised Gaussian."""
    return apply_heat(SpectralVectorField(grid, _delta_coeffs(grid, lam)), t)


@dataclass
class ProfileReport:
    q: float
    times: np.ndarray
    residual_series: np.ndarray
    monotone_decreasing: bool
    final_value: float
    lam: np.ndarray
    flagged: bool = False
    profile_constant: float = math.nan

    def to_dict(self) -> dict:
        return {
            "q": "inf" if math.isinf(self.q) else self.q,
            "times": [float(t) for t in self.times],
            "residual_series": [float(r) for r in self.residual_series],
            "monotone_decreasing": bool(self.monotone_decreasing),
            "final_value": float(self.final_value),
            "lambda": [float(v) for v in self.lam],
            "flagged": bool(self.flagged),
            "profile_constant": float(self.profile_constant),
        }


def profile_constant(grid: Grid, q: float, t: float = 1.0) -> float:
    """Measured ``t^{(n/2)(1-1/q)} ||E(., t)||_q`` on the grid."""
    from .kernels import heat_kernel_field

    return t ** decay_exponent(grid.n_dims, q) * lq_norm(heat_kernel_field(grid, t), q)


def profile_residual(
    traj: Trajectory,
    lam: LambdaEstimate | Sequence[float],
    q: float,
    times: Sequence[float] | None = None,
    window: tuple[float, float] | None = None,
) -> ProfileReport:
    """``t^{(n/2)(1-1/q)} ||u(t) - lam E(., t)||_q`` over snapshot times.

    Monotonicity is judged over ``window`` (default: the final decade of the
    sampled times).
    """
    q = check_q(q)
    flagged = False
    if isinstance(lam, LambdaEstimate):
        flagged = not lam.converged
        lam_value = np.asarray(lam.value, dtype=float)
    else:
        lam_value = np.asarray(lam, dtype=float)
    grid = traj.grid
    ts = np.asarray(times if times is not None else traj.snapshot_times, dtype=float)
    ts = ts[ts > 0]
    a = decay_exponent(grid.n_dims, q)
    res = np.array(
        [t**a * lq_norm(traj.snapshot(t) - heat_profile(grid, lam_value, t), q) for t in ts]
    )
    if window is None:
        window = (ts[-1] / 10.0, ts[-1])
    sel = (ts >= window[0] * (1 - 1e-12)) & (ts <= window[1] * (1 + 1e-12))
    tail = res[sel]
    monotone = bool(tail.size >= 2 and np.all(np.diff(tail) < 0))
    return ProfileReport(
        q, ts, res, monotone, float(res[-1]), lam_value, flagged, profile_constant(grid, q)
    )


@dataclass
class LinearProfileReport:
    kernel: str
    q: float
    times: np.ndarray
    lam: np.ndarray
    residual_series: np.ndarray
    normalized_norm: np.ndarray
    quadrature_error: float
    mass_decay_ok: bool
    part2_ok: bool | None
    beta: float | None = None
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "q": "inf" if math.isinf(self.q) else self.q,
            "times": [float(t) for t in self.times],
            "lambda": [float(v) for v in self.lam],
            "residual_series": [float(v) for v in self.residual_series],
            "normalized_norm": [float(v) for v in self.normalized_norm],
            "quadrature_error": float(self.quadrature_error),
            "mass_decay_ok": bool(self.mass_decay_ok),
            "part2_ok": self.part2_ok,
            "beta": None if self.beta is None else ("inf" if math.isinf(self.beta) else self.beta),
            "warnings": list(self.warnings),
        }


def _as_coeffs(f) -> np.ndarray:
    """Coefficients with a leading component axis (length 1 for scalars)."""
    if isinstance(f, SpectralVectorField):
        return f.coeffs
    if isinstance(f, ScalarField):
        return f.coeffs[None]
    raise TypeError("forcing must return a ScalarField or SpectralVectorField")


def _duhamel_march(grid, kernel, eps, forcing, mesh, wanted):
    """``Phi' = L Phi + f`` from zero data by the exponential trapezoid rule."""
    f_old = _as_coeffs(forcing(mesh[0]))
    phi = np.zeros_like(f_old)
    out = {}
    masses = [np.zeros(f_old.shape[0])]
    props = {}
    for i in range(len(mesh) - 1):
        h = mesh[i + 1] - mesh[i]
        key = round(h, 15)
        prop = props.get(key)
        if prop is None:
            prop = props[key] = ExponentialPropagator(grid, h, None if kernel == "heat" else eps)
        f_new = _as_coeffs(forcing(mesh[i + 1]))
        phi = prop.exp(phi) + h * prop.phi1(f_old) + h * prop.phi2(f_new - f_old)
        f_old = f_new
        zero = (slice(None),) + (0,) * grid.n_dims
        masses.append(np.real(phi[zero]) * grid.volume)
        if mesh[i + 1] in wanted:
            out[mesh[i + 1]] = phi.copy()
    return out, np.array(masses)


def _profile_mesh(t_max: float, rel_step: float, h_max: float, wanted) -> np.ndarray:
    pts = [0.0]
    t = 0.0
    while t < t_max:
        t = min(t_max, t + min(h_max, rel_step * (1.0 + t)))
        pts.append(t)
    return np.union1d(np.array(pts), np.asarray(sorted(wanted), dtype=float))


def verify_linear_profile(
    kernel: str,
    forcing: Callable[[float], ScalarField | SpectralVectorField],
    q: float,
    t_list: Sequence[float],
    grid: Grid,
    eps: float | None = None,
    lam: Sequence[float] | None = None,
    beta: float | None = None,
    rel_step: float = 0.02,
    h_max: float = 1.0,
    tol: float = 1e-3,
) -> LinearProfileReport:
    """Check ``||Phi(t) - lam M(., t)||_q = o(t^{-(n/2)(1-1/q)})`` for ``Phi = int_0^t M(t-s) f(s) ds``.

    ``kernel`` is ``'heat'`` or ``'m_epsilon'`` (then ``eps`` is required).
    ``lam`` defaults to the space-time integral of the forcing, computed on
    the forcing's zero mode and tail-extrapolated.  The Duhamel integral is
    computed at two step sizes and Richardson-combined; the difference gives
    the error estimate, and exceeding ``tol`` (relative) raises
    :class:`QuadratureError`.
    """
    q = check_q(q)
    if kernel not in ("heat", "m_epsilon"):
        raise ConfigurationError(f"unknown kernel {kernel!r}")
    if kernel == "m_epsilon" and not (eps and eps > 0):
        raise ConfigurationError("kernel 'm_epsilon' needs eps > 0")
    t_list = np.asarray(sorted(float(t) for t in t_list))
    n = grid.n_dims
    a = decay_exponent(n, q)
    warn_msgs = []

    def compute(step):
        mesh = _profile_mesh(t_list[-1], step, h_max, t_list)
        fields, masses = _duhamel_march(grid, kernel, eps, forcing, mesh, set(t_list.tolist()))
        return mesh, fields, masses

    mesh, fields, masses = compute(rel_step)
    _, fields_half, _ = compute(rel_step / 2.0)
    qerr = 0.0
    for t in t_list:
        diff = fields_half[t] - fields[t]
        scale = max(np.max(np.abs(fields_half[t])), np.finfo(float).tiny)
        qerr = max(qerr, float(np.max(np.abs(diff))) / scale / 3.0)
    if qerr > tol:
        raise QuadratureError(f"Duhamel quadrature error {qerr:.2e} exceeds tolerance {tol:.2e}")
    # second-order rule: one Richardson level from the two step sizes
    fields = {t: fields_half[t] + (fields_half[t] - fields[t]) / 3.0 for t in t_list}

    if lam is None:
        # the mass needs only the zero mode, so its integral runs 100x further
        long_mesh = _profile_mesh(100.0 * t_list[-1], rel_step, math.inf, [])
        zero = (slice(None),) + (0,) * n
        rates = np.array([np.real(_as_coeffs(forcing(s))[zero]) * grid.volume for s in long_mesh])
        mass = cumulative_simpson(rates, x=long_mesh, axis=0, initial=0.0)
        lam_value, _, ok = richardson_tail(long_mesh, mass, order="auto")
        if not ok:
            warn_msgs.append("forcing mass tail not converged")
    else:
        lam_value = np.atleast_1d(np.asarray(lam, dtype=float))

    # ||f(t)||_1 = O(1/t): t ||f(t)||_1 must not grow over the second half of the mesh
    probe = np.geomspace(max(t_list[-1] / 10.0, 1e-3), t_list[-1], 6)
    l1 = np.array([lq_norm_physical(_inverse(_as_coeffs(forcing(s)), grid), grid, 1.0) for s in probe])
    mass_ok = True
    if np.all(l1 > 0):
        slope = np.polyfit(np.log(probe), np.log(l1), 1)[0]
        mass_ok = bool(slope <= -1.0 + 0.05)
        if not mass_ok:
            warn_msgs.append(f"||f(t)||_1 decays like t^{slope:.3f}, slower than 1/t")
    part2_ok = None
    beyond = math.isinf(q) if n <= 2 else (q >= n / (n - 2))
    if beyond or q == 1:
        if beta is None:
            beta = q
        if beyond:
            lb = 0.0 if math.isinf(beta) else 1.0 / beta
            lq = 0.0 if math.isinf(q) else 1.0 / q
            if not (lq <= lb < lq + 2.0 / n):
                raise ConfigurationError(f"beta={beta} outside the admissible range for q={q}")
            lbeta = np.array(
                [lq_norm_physical(_inverse(_as_coeffs(forcing(s)), grid), grid, beta) for s in probe]
            )
            need = -(1.0 + decay_exponent(n, beta))
            if np.all(lbeta > 0):
                slope_b = np.polyfit(np.log(probe), np.log(lbeta), 1)[0]
                part2_ok = bool(slope_b <= need + 0.05)
                if not part2_ok:
                    warn_msgs.append(f"||f(t)||_beta decays like t^{slope_b:.3f}, need <= t^{need:.3f}")
            else:
                part2_ok = True
        else:
            part2_ok = True
    for msg in warn_msgs:
        warnings.warn(msg)

    res, normed = [], []
    for t in t_list:
        coeffs = fields[t]
        if kernel == "heat":
            prof = np.exp(-t * grid.k2)[None] * _delta_coeffs(grid, lam_value)
        else:
            prof = apply_m_epsilon(SpectralVectorField(grid, _delta_coeffs(grid, lam_value)), t, eps).coeffs
        res.append(t**a * lq_norm_physical(_inverse(coeffs - prof, grid), grid, q))
        normed.append(t**a * lq_norm_physical(_inverse(coeffs, grid), grid, q))
    return LinearProfileReport(
        kernel, q, t_list, lam_value, np.array(res), np.array(normed), qerr, mass_ok, part2_ok, beta, warn_msgs
    )
