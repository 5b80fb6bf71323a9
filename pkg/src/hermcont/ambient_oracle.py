"""Finite-difference i∂∂̄ and Chern-Ricci forms in ambient coordinates.

This module is the independent check for every closed-form derivative in the
package, so it deliberately shares no code with the geometry modules: it only
evaluates scalar functions of complex coordinates and differentiates them
numerically.

The complex Hessian comes from the real one through

    ∂_j ∂_k̄ f = 1/4 [ (f_{x_j x_k} + f_{y_j y_k}) + i (f_{x_j y_k} - f_{y_j x_k}) ],

with centred second-order stencils and one Richardson level, giving an
``O(step^4)`` truncation error.  Points must stay at least ``10 * step`` from
the singular set of the field (origin, ``y = 0``, and so on).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .tensor_core import HermitianForm

DEFAULT_STEP = 1e-3


class FieldNotEvaluable(ValueError):
    pass


@dataclass(frozen=True)
class ScalarField:
    dim: int
    eval: Callable[[np.ndarray], float]

    def __call__(self, p) -> float:
        return self.eval(np.asarray(p, dtype=complex))


@dataclass(frozen=True)
class MetricField:
    dim: int
    eval: Callable[[np.ndarray], HermitianForm]

    def __call__(self, p) -> HermitianForm:
        return self.eval(np.asarray(p, dtype=complex))


def _as_callable(f):
    if isinstance(f, (ScalarField, MetricField)):
        return f
    return lambda p: f(np.asarray(p, dtype=complex))


def _real_hessian(f, x0: np.ndarray, h: float) -> np.ndarray:
    """Centred second differences of ``f`` on R^m at ``x0``."""
    m = x0.size

    def ev(x):
        val = float(f(x[: m // 2] + 1j * x[m // 2 :]))
        if not np.isfinite(val):
            raise FieldNotEvaluable("field not evaluable")
        return val

    f0 = ev(x0)
    eye = np.eye(m) * h
    plus = np.array([ev(x0 + eye[a]) for a in range(m)])
    minus = np.array([ev(x0 - eye[a]) for a in range(m)])
    hess = np.empty((m, m))
    for a in range(m):
        hess[a, a] = (plus[a] - 2.0 * f0 + minus[a]) / h**2
        for b in range(a + 1, m):
            pp = ev(x0 + eye[a] + eye[b])
            pm = ev(x0 + eye[a] - eye[b])
            mp = ev(x0 - eye[a] + eye[b])
            mm = ev(x0 - eye[a] - eye[b])
            hess[a, b] = hess[b, a] = (pp - pm - mp + mm) / (4.0 * h**2)
    return hess


def complex_hessian_fd(f, p, step: float = DEFAULT_STEP) -> HermitianForm:
    """Coefficient matrix of ``i∂∂̄f`` at ``p``, computed by finite differences."""
    if not step > 0:
        raise ValueError("step must be positive")
    f = _as_callable(f)
    p = np.asarray(p, dtype=complex)
    n = p.size
    x0 = np.concatenate([p.real, p.imag])
    coarse = _real_hessian(f, x0, step)
    fine = _real_hessian(f, x0, step / 2)
    hr = (4.0 * fine - coarse) / 3.0
    xx = hr[:n, :n]
    yy = hr[n:, n:]
    xy = hr[:n, n:]
    yx = hr[n:, :n]
    h = 0.25 * ((xx + yy) + 1j * (xy - yx))
    h = 0.5 * (h + h.conj().T)
    return HermitianForm(h, tuple(p))


def ricci_fd(m, p, step: float = DEFAULT_STEP) -> HermitianForm:
    """Chern-Ricci form ``-i∂∂̄ log det g`` of a metric field, by finite differences."""
    m = _as_callable(m)

    def neg_log_det(q):
        d = m(q).det()
        if not d > 0:
            raise FieldNotEvaluable("field not evaluable")
        return -np.log(d)

    return complex_hessian_fd(neg_log_det, p, step)


def log_volume_hessian_check(p, step: float = DEFAULT_STEP, scale: float = 1.0) -> float:
    """Max-norm defect of ``i∂∂̄ log Ω = α`` at a point of C x H.

    ``Ω = α ^ β`` has coefficient ``1 / (4y)`` against the Euclidean volume
    form of C^2 with coordinates ``(z, w)``; ``scale`` multiplies Ω (the
    identity is insensitive to constant factors).
    """
    p = np.asarray(p, dtype=complex)
    y = p[1].imag
    if not y > 0:
        raise ValueError("not in upper half plane")

    def log_omega(q):
        yy = q[1].imag
        if yy <= 0:
            return np.nan
        return np.log(scale / (4.0 * yy))

    hess = complex_hessian_fd(log_omega, p, step)
    alpha = np.zeros((2, 2), dtype=complex)
    alpha[1, 1] = 1.0 / (4.0 * y**2)
    return float(np.max(np.abs(hess.entries - alpha)))
