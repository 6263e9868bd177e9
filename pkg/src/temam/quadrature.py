"""Adaptive Gauss-Kronrod quadrature in one and two dimensions, plus fixed tensor rules.

Integrands are vectorised: they receive numpy arrays of abscissae and return
arrays of the same shape.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._validation import QuadratureError

__all__ = [
    "QuadratureResult",
    "gauss_kronrod",
    "adaptive_triangle",
    "tensor_triangle",
    "gauss_hermite_3d",
]

# 7-point Gauss / 15-point Kronrod pair on [-1, 1]
_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes
_GAUSS_W[1:7:2] = _WG[:3]
_GAUSS_W[7] = _WG[3]
_GAUSS_W[9:15:2] = _WG[2::-1]


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int

    def to_dict(self) -> dict:
        return {
            "value": float(self.value),
            "abs_error_estimate": float(self.abs_error_estimate),
            "evaluations": int(self.evaluations),
        }


def _gk15(f, a, b):
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    y = f(c + h * _NODES)
    k = h * float(_KRONROD_W @ y)
    g = h * float(_GAUSS_W @ y)
    return k, abs(k - g)


def gauss_kronrod(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = 1e-10,
    rel_tol: float = 0.0,
    max_evals: int = 200_000,
) -> QuadratureResult:
    """Globally adaptive G7-K15 on ``[a, b]``; bisects the worst interval until the total estimate meets tolerance."""
    if a == b:
        return QuadratureResult(0.0, 0.0, 0)
    value, err = _gk15(f, a, b)
    evals = 15
    heap = [(-err, a, b, value, err)]
    total, total_err = value, err
    while total_err > max(tol, rel_tol * abs(total)):
        if evals + 30 > max_evals:
            raise QuadratureError(
                f"tolerance {tol:.1e} not met within {max_evals} evaluations (estimate {total_err:.2e})"
            )
        _, lo, hi, v, e = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        evals += 30
        heapq.heappush(heap, (-e1, lo, mid, v1, e1))
        heapq.heappush(heap, (-e2, mid, hi, v2, e2))
        # re-sum in interval order so the result does not depend on heap history
        parts = sorted(heap, key=lambda item: item[1])
        total = math.fsum(p[3] for p in parts)
        total_err = math.fsum(p[4] for p in parts)
    return QuadratureResult(total, total_err, evals)


def adaptive_triangle(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    t: float,
    tol: float = 1e-10,
    max_evals: int = 2_000_000,
) -> QuadratureResult:
    """``int_0^t ds int_0^s dtau f(s, tau)`` by nested adaptive Gauss-Kronrod.

    The inner integral is computed to ``tol / (2 t)`` so the inner errors sum
    to at most half the budget.
    """
    if t <= 0:
        return QuadratureResult(0.0, 0.0, 0)
    counter = {"evals": 0, "err": 0.0}
    inner_tol = 0.5 * tol / t

    def outer(s_values):
        out = np.empty_like(s_values)
        for i, s in enumerate(s_values):
            r = gauss_kronrod(lambda tau: f(np.full_like(tau, s), tau), 0.0, s, inner_tol, max_evals=max_evals)
            counter["evals"] += r.evaluations
            counter["err"] = max(counter["err"], r.abs_error_estimate)
            out[i] = r.value
        return out

    res = gauss_kronrod(outer, 0.0, t, 0.5 * tol, max_evals=max_evals)
    return QuadratureResult(res.value, res.abs_error_estimate + counter["err"] * t, counter["evals"])


def tensor_triangle(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray], t: float, order: int = 60, panels: int = 8
) -> QuadratureResult:
    """Fixed composite Gauss-Legendre rule on the triangle via ``tau = s v``.

    ``s`` is split into geometrically graded panels towards zero.  The error
    estimate compares against the rule of order ``order // 2``.
    """
    if t <= 0:
        return QuadratureResult(0.0, 0.0, 0)

    def rule(m):
        x, w = np.polynomial.legendre.leggauss(m)
        edges = np.concatenate([[0.0], t * np.geomspace(2.0 ** (-panels + 1), 1.0, panels)])
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            s = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x
            ws = 0.5 * (hi - lo) * w
            v = 0.5 * (x + 1.0)
            wv = 0.5 * w
            S, V = np.meshgrid(s, v, indexing="ij")
            vals = f(S, S * V) * S
            total += float(ws @ vals @ wv)
        return total, m * m * panels

    hi_val, evals = rule(order)
    lo_val, evals_lo = rule(max(order // 2, 2))
    return QuadratureResult(hi_val, abs(hi_val - lo_val), evals + evals_lo)


def gauss_hermite_3d(
    poly: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    decay: float,
    rel_tol: float = 1e-13,
    start: int = 4,
    max_nodes: int = 64,
) -> QuadratureResult:
    """``int_{R^3} e^{-decay |xi|^2} poly(xi) d xi`` by tensor Gauss-Hermite, doubling nodes until stable."""
    if not decay > 0:
        raise ValueError("decay must be positive")
    scale = 1.0 / math.sqrt(decay)
    prev = None
    m = start
    evals = 0
    while m <= max_nodes:
        x, w = np.polynomial.hermite.hermgauss(m)
        X, Y, Z = np.meshgrid(x * scale, x * scale, x * scale, indexing="ij")
        W = np.einsum("i,j,k->ijk", w, w, w)
        val = float(np.sum(W * poly(X, Y, Z))) * scale**3
        evals += m**3
        if prev is not None and abs(val - prev) <= rel_tol * max(abs(val), 1e-300):
            return QuadratureResult(val, abs(val - prev), evals)
        prev = val
        m *= 2
    raise QuadratureError("Gauss-Hermite rule did not stabilise")
