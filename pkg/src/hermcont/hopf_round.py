"""Round Hopf manifolds and the radially reduced continuity equation.

On ``(C^n minus 0) / (z ~ alpha z)`` with all ``|alpha_j| = m`` every
``U(n)``- and deck-invariant potential is ``phi(z) = u(t)`` with
``t = log r^2``, periodic of period ``T = 2 log m``.  Relative to the Hopf
metric, ``i∂∂̄phi`` has eigenvalue ``u'`` on the ``n - 1`` directions
orthogonal to ``z`` and ``u''`` along ``z``, while the reference family has
eigenvalues ``1 - ns`` and ``1``.  The scalar equation therefore becomes

    (n-1) log((1 - ns + u') / (1 - ns)) + log(1 + u'') = (u - u0) / s,

discretised with centred periodic differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretize import (
    MetricLostPositivity,
    periodic_d1,
    periodic_d2,
    periodic_trapezoid,
    trig_interpolate,
    trig_series,
)
from .estimates import DiagnosticsRow
from .solver import CyclicTridiagonal, Problem
from .tensor_core import HermitianForm

FAMILY = "hopf_round"


class OutsideExistenceInterval(ValueError):
    pass


@dataclass(frozen=True)
class HopfRoundParams:
    n: int
    modulus: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("complex dimension n must be an integer >= 2")
        m = float(self.modulus)
        if not m > 0 or m == 1.0:
            raise ValueError("modulus must be positive and different from 1")
        if m < 1:
            m = 1.0 / m
        object.__setattr__(self, "modulus", m)

    @property
    def period(self) -> float:
        return 2.0 * np.log(self.modulus)

    @property
    def s_limit(self) -> float:
        return 1.0 / self.n


@dataclass(frozen=True)
class RadialProfile:
    """Samples ``u(t_i)`` at ``t_i = i T / N``; ``phi(z) = u(log r^2)``."""

    values: np.ndarray
    period: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 16:
            raise ValueError("radial profile needs at least 16 nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def grid_size(self) -> int:
        return self.values.size

    @property
    def step(self) -> float:
        return self.period / self.grid_size

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.grid_size) * self.step

    @classmethod
    def zeros(cls, period: float, n: int = 256) -> "RadialProfile":
        return cls(np.zeros(n), period)

    @classmethod
    def from_trig(cls, period: float, n: int = 256, const: float = 0.0, cos=(), sin=()):
        t = np.arange(n) * period / n
        return cls(trig_series(t, period, const, cos, sin)[0], period)

    def __call__(self, t):
        return trig_interpolate(self.values, self.period, t)

    def lift(self):
        """``phi(z) = u(log |z|^2)`` as a function on C^n."""
        return lambda z: float(self(np.log(np.sum(np.abs(z) ** 2)))[0])


def _r2(p) -> float:
    p = np.asarray(p, dtype=complex)
    r2 = float(np.sum(np.abs(p) ** 2))
    if r2 == 0.0:
        raise ValueError("point must be nonzero")
    return r2


def hopf_metric(p) -> HermitianForm:
    p = np.asarray(p, dtype=complex)
    r2 = _r2(p)
    return HermitianForm(np.eye(p.size) / r2, tuple(p))


def hopf_ricci(p) -> HermitianForm:
    """Closed form ``n delta/r^2 - n conj(z_j) z_k / r^4``."""
    p = np.asarray(p, dtype=complex)
    r2 = _r2(p)
    n = p.size
    radial = np.outer(p.conj(), p) / r2**2
    return HermitianForm(n * np.eye(n) / r2 - n * radial, tuple(p))


def _check_s(s: float, n: int, allow_zero: bool = True) -> None:
    lo_ok = s >= 0 if allow_zero else s > 0
    if not (lo_ok and s < 1.0 / n):
        raise OutsideExistenceInterval("outside existence interval")


def omega_hat(s: float, p) -> HermitianForm:
    """``omega_H - s Ric(omega_H)``, valid for ``0 <= s < 1/n``."""
    p = np.asarray(p, dtype=complex)
    n = p.size
    _check_s(s, n)
    r2 = _r2(p)
    radial = np.outer(p.conj(), p) / r2**2
    return HermitianForm((1 - n * s) * np.eye(n) / r2 + n * s * radial, tuple(p))


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, RadialProfile) else np.asarray(u, dtype=float)


def _derivs(u, period: float):
    h = period / u.size
    return periodic_d1(u, h), periodic_d2(u, h)


def _guard_arrays(du, d2u, s, n):
    trans = 1 - n * s + du
    rad = 1 + d2u
    bad = np.flatnonzero((trans <= 0) | (rad <= 0))
    return trans, rad, bad


def reduced_residual(u, u0, s: float, n: int, period: float | None = None) -> np.ndarray:
    """Nodewise residual of the reduced scalar equation."""
    _check_s(s, n, allow_zero=False)
    period = u.period if period is None else period
    uv, u0v = _values(u), _values(u0)
    du, d2u = _derivs(uv, period)
    trans, rad, bad = _guard_arrays(du, d2u, s, n)
    if bad.size:
        raise MetricLostPositivity(int(bad[0]))
    return (n - 1) * np.log(trans / (1 - n * s)) + np.log(rad) - (uv - u0v) / s


def reduced_linearization(u, s: float, n: int, period: float | None = None) -> CyclicTridiagonal:
    """Jacobian ``(n-1) D/(1-ns+Du) + D^2/(1+D^2u) - 1/s`` as a cyclic tridiagonal operator."""
    _check_s(s, n, allow_zero=False)
    period = u.period if period is None else period
    uv = _values(u)
    h = period / uv.size
    du, d2u = _derivs(uv, period)
    trans, rad, bad = _guard_arrays(du, d2u, s, n)
    if bad.size:
        raise MetricLostPositivity(int(bad[0]))
    c1 = (n - 1) / trans
    c2 = 1.0 / rad
    lower = -c1 / (2 * h) + c2 / h**2
    upper = c1 / (2 * h) + c2 / h**2
    diag = -2.0 * c2 / h**2 - 1.0 / s
    return CyclicTridiagonal(lower, diag, upper)


def check_initial_data(u0, n: int, period: float | None = None) -> None:
    """``omega_0 = omega_H + i∂∂̄phi_0`` must be positive on the grid."""
    period = u0.period if period is None else period
    du, d2u = _derivs(_values(u0), period)
    bad = np.flatnonzero((1 + du <= 0) | (1 + d2u <= 0))
    if bad.size:
        raise MetricLostPositivity(int(bad[0]), "initial metric not positive")


def diagnostics(u, u0, s: float, n: int, period: float | None = None) -> DiagnosticsRow:
    _check_s(s, n, allow_zero=False)
    period = u.period if period is None else period
    uv, u0v = _values(u), _values(u0)
    h = period / uv.size
    du, d2u = _derivs(uv, period)
    du0, d2u0 = _derivs(u0v, period)
    trans, rad, bad = _guard_arrays(du, d2u, s, n)
    if bad.size:
        raise MetricLostPositivity(int(bad[0]))
    vol = (trans / (1 - n * s)) ** (n - 1) * rad
    trace_h = (n - 1) * trans + rad
    tr_w_w0 = (n - 1) * (1 + du0) / trans + (1 + d2u0) / rad
    curv = (tr_w_w0 - n) / s
    hat_vol = (1 - n * s) ** (n - 1)
    defect = abs(
        periodic_trapezoid(np.exp((uv - u0v) / s) * hat_vol, h)
        - periodic_trapezoid(trans ** (n - 1) * rad, h)
    )
    return DiagnosticsRow(
        s=s,
        phi_inf=float(np.max(np.abs(uv))),
        vol_ratio_min=float(np.min(vol)),
        vol_ratio_max=float(np.max(vol)),
        trace_max=float(np.max(trace_h)),
        R_min=float(np.min(curv)),
        R_max=float(np.max(curv)),
        normalization_defect=defect,
    )


def problem(params: HopfRoundParams, u0: RadialProfile) -> Problem:
    n, period = params.n, params.period
    if abs(u0.period - period) > 1e-12 * period:
        raise ValueError("initial profile period does not match the manifold")
    u0v = u0.values

    def guard(u, s):
        du, d2u = _derivs(u, period)
        bad = _guard_arrays(du, d2u, s, n)[2]
        return (bad.size == 0, int(bad[0]) if bad.size else None)

    return Problem(
        residual=lambda u, s: reduced_residual(u, u0v, s, n, period),
        linearization=lambda u, s: reduced_linearization(u, s, n, period),
        guard=guard,
        shape=(u0.grid_size,),
        period=period,
        family=FAMILY,
        diagnostics=lambda u, s: diagnostics(u, u0v, s, n, period),
        meta={"n": n, "modulus": params.modulus, "u0": u0v},
    )


def schedule(params: HopfRoundParams, s_start: float = 1e-3, end_offset: float = 1e-5) -> list[float]:
    """``s_k = 1/n - (1/n - s_start) 2^{-k}``, ending exactly at ``1/n - end_offset``."""
    return halving_schedule(params.s_limit, s_start, end_offset, "s_start must lie in (0, 1/n)")


def halving_schedule(lim: float, s_start: float, end_offset: float, message: str) -> list[float]:
    if not 0 < s_start < lim:
        raise OutsideExistenceInterval(message)
    if not 0 < end_offset < lim - s_start:
        raise OutsideExistenceInterval("end_offset must lie in (0, s_limit - s_start)")
    out = [s_start]
    gap = lim - s_start
    while gap / 2 > end_offset:
        gap /= 2
        out.append(lim - gap)
    out.append(lim - end_offset)
    # 12 significant digits, so the CSV column reproduces s exactly
    return [float(f"{x:.12g}") for x in out]


def random_point(rng, n: int) -> np.ndarray:
    """Random point with ``|z|`` in a fundamental shell-ish range away from 0."""
    p = rng.normal(size=n) + 1j * rng.normal(size=n)
    return p / np.linalg.norm(p) * rng.uniform(0.5, 2.0)
