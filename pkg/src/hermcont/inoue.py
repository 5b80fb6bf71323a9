"""Inoue surfaces S_M and the leafwise reduction of the normalised equation.

The covering space is ``C x H`` with coordinates ``(z, w)``, ``y = Im w``.
Forms are stored in ``(z, w)`` order:

    alpha = 1/(4 y^2) i dw ^ dw̄,   beta = y i dz ^ dz̄,   omega_Tr = 4 alpha + beta,
    Omega = alpha ^ beta  (coefficient 1/(4y) against i dz ^ dz̄ ^ i dw ^ dw̄).

Potentials invariant under the leaf translations and the deck group are
``phi = u(eta)`` with ``eta = log y``, periodic of period ``P = log lambda``.
Since ``i∂∂̄ u(log y) = (u'' - u') alpha``, the reference metric
``hat = ((4 + s) alpha + beta) / (s + 1)`` turns the normalised equation
into

    log[((4 + s) + (s + 1)(u'' - u')) / s] = ((s + 1) u - u0) / s.

The solution metric has relative eigenvalue 1 along ``z`` and
``1 + (s + 1)(u'' - u') / (4 + s)`` along ``w`` with respect to ``hat``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .discretize import MetricLostPositivity, periodic_d1, periodic_d2, periodic_trapezoid
from .estimates import DiagnosticsRow
from .hopf_round import RadialProfile
from .solver import CyclicTridiagonal, Problem
from .tensor_core import HermitianForm, riemannian_length_factor

FAMILY = "inoue"
DEFAULT_MATRIX = ((0, 1, 0), (0, 0, 1), (1, 1, 0))


@dataclass(frozen=True)
class InoueParams:
    """Validated ``M`` in SL_3(Z) with eigen-data ``M m = mu m``, ``M l = lambda l``."""

    matrix: np.ndarray
    lam: float
    mu: complex
    m_vec: np.ndarray  # complex, unit norm, first entry real positive
    l_vec: np.ndarray  # real, unit norm, first entry positive

    @property
    def period(self) -> float:
        return float(np.log(self.lam))

    @property
    def base_length_limit(self) -> float:
        """Length ``P / sqrt 2`` of the limit circle under the package convention."""
        return self.period / np.sqrt(2.0)

    def fiber_diameter(self) -> float:
        """z-diameter of the unit cell spanned by the translations ``(m_j, l_j)``."""
        best = 0.0
        for sig in itertools.product((-1, 0, 1), repeat=3):
            best = max(best, abs(np.dot(sig, self.m_vec)))
        return float(best)


def validate_matrix(rows) -> InoueParams:
    m = np.array(rows)
    if m.shape != (3, 3):
        raise ValueError("matrix must be 3x3")
    if not np.all(np.equal(np.mod(m, 1), 0)):
        raise ValueError("matrix entries must be integers")
    m = m.astype(np.int64)
    if round(np.linalg.det(m)) != 1:
        raise ValueError("not in SL₃(ℤ)")
    vals, vecs = np.linalg.eig(m.astype(float))
    real = np.abs(vals.imag) <= 1e-12 * np.max(np.abs(vals))
    if real.sum() != 1:
        raise ValueError("not Inoue type")
    i_re = int(np.flatnonzero(real)[0])
    lam = float(vals[i_re].real)
    if lam <= 1.0:
        raise ValueError("not Inoue type")
    i_cx = int(np.flatnonzero(~real & (vals.imag > 0))[0])
    mu = complex(vals[i_cx])
    if abs(abs(mu) ** 2 * lam - 1.0) > 1e-10:
        raise ValueError("eigenvalues do not multiply to 1")
    lv = np.real(vecs[:, i_re])
    lv = lv / np.linalg.norm(lv)
    lv = lv if lv[0] > 0 else -lv
    mv = vecs[:, i_cx]
    mv = mv / np.linalg.norm(mv)
    mv = mv * np.exp(-1j * np.angle(mv[0]))
    m.setflags(write=False)
    return InoueParams(m, lam, mu, mv, lv)


def _y(w) -> float:
    y = float(np.imag(w))
    if not y > 0:
        raise ValueError("not in upper half plane")
    return y


def alpha_form(w) -> HermitianForm:
    y = _y(w)
    return HermitianForm(np.diag([0.0, 1.0 / (4 * y * y)]).astype(complex))


def beta_form(w) -> HermitianForm:
    y = _y(w)
    return HermitianForm(np.diag([y, 0.0]).astype(complex))


def tricerri(w) -> HermitianForm:
    y = _y(w)
    return HermitianForm(np.diag([y, 1.0 / (y * y)]).astype(complex))


def omega_coefficient(w) -> float:
    """``Omega`` against ``i dz ^ dz̄ ^ i dw ^ dw̄``."""
    return 1.0 / (4.0 * _y(w))


def omega_hat(s: float, w) -> HermitianForm:
    """``(omega_Tr + s alpha) / (s + 1) = ((4 + s) alpha + beta) / (s + 1)``."""
    if s < 0:
        raise ValueError("s must be non-negative")
    y = _y(w)
    return HermitianForm(np.diag([y / (s + 1), (4 + s) / (4 * y * y * (s + 1))]).astype(complex))


class LeafProfile(RadialProfile):
    """Samples ``u(eta_i)``, ``eta_i = i P / N``; ``phi(z, w) = u(log Im w)``."""

    def lift(self):
        return lambda p: float(self(np.log(np.imag(p[1])))[0])


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, RadialProfile) else np.asarray(u, dtype=float)


def _leaf_derivs(u, period):
    h = period / u.size
    return periodic_d2(u, h) - periodic_d1(u, h)


def _w_term(u, s, period):
    """``(4 + s) + (s + 1)(D^2 u - D u)``, proportional to the ``w`` entry of ``omega``."""
    return (4 + s) + (s + 1) * _leaf_derivs(u, period)


def reduced_residual(u, u0, s: float, period: float | None = None) -> np.ndarray:
    if not s > 0:
        raise ValueError("s must be positive")
    period = u.period if period is None else period
    uv, u0v = _values(u), _values(u0)
    q = _w_term(uv, s, period)
    bad = np.flatnonzero(q <= 0)
    if bad.size:
        raise MetricLostPositivity(int(bad[0]))
    return np.log(q / s) - ((s + 1) * uv - u0v) / s


def reduced_linearization(u, s: float, period: float | None = None) -> CyclicTridiagonal:
    """``(s + 1)(D^2 - D) / q - (s + 1)/s`` with ``q`` the guarded ``w`` term."""
    if not s > 0:
        raise ValueError("s must be positive")
    period = u.period if period is None else period
    uv = _values(u)
    h = period / uv.size
    q = _w_term(uv, s, period)
    bad = np.flatnonzero(q <= 0)
    if bad.size:
        raise MetricLostPositivity(int(bad[0]))
    c = (s + 1) / q
    lower = c * (1.0 / h**2 + 1.0 / (2 * h))
    upper = c * (1.0 / h**2 - 1.0 / (2 * h))
    diag = -2.0 * c / h**2 - (s + 1) / s
    return CyclicTridiagonal(lower, diag, upper)


def constant_solution(s: float) -> float:
    """``c_s = s/(s+1) log(1 + 4/s)``, the exact solution for ``u0 = 0``."""
    return s / (s + 1) * np.log1p(4.0 / s)


def initial_w_term(u0, period: float | None = None) -> np.ndarray:
    """``4 + u0'' - u0'``: the ``w`` entry of ``omega_0`` in units of ``alpha``."""
    period = u0.period if period is None else period
    return 4.0 + _leaf_derivs(_values(u0), period)


def check_initial_data(u0, period: float | None = None) -> None:
    bad = np.flatnonzero(initial_w_term(u0, period) <= 0)
    if bad.size:
        raise MetricLostPositivity(int(bad[0]), "initial metric not positive")


def leaf_metric(u, s: float, eta: float, du: float = 0.0, d2u: float = 0.0) -> HermitianForm:
    """``hat + (u'' - u') alpha`` at the point ``w = i e^eta``."""
    y = np.exp(eta)
    ww = ((4 + s) / (s + 1) + d2u - du) / (4 * y * y)
    return HermitianForm(np.diag([y / (s + 1), ww]).astype(complex))


def gh_diagnostics(params: InoueParams, u, s: float, period: float | None = None) -> dict:
    """Fibre-diameter bound and base-circle length of ``omega``.

    The fibre bound is ``max_eta sqrt(2 omega_zz) * (z-diameter of the unit
    cell)``.  The base length integrates the length of ``∂/∂eta = y ∂/∂y``
    over one period.
    """
    period = params.period if period is None else period
    uv = _values(u)
    h = period / uv.size
    q = _w_term(uv, s, period)
    bad = np.flatnonzero(q <= 0)
    if bad.size:
        raise MetricLostPositivity(int(bad[0]))
    du, d2u = periodic_d1(uv, h), periodic_d2(uv, h)
    eta = np.arange(uv.size) * h
    zz = np.exp(eta) / (s + 1)
    fiber = float(np.sqrt(2.0 * np.max(zz)) * params.fiber_diameter())
    lengths = np.empty(uv.size)
    for i, e in enumerate(eta):
        g = leaf_metric(uv, s, e, du[i], d2u[i])
        # y ∂_y in (x_z, x_w, y_z, y_w) ordering
        lengths[i] = riemannian_length_factor(g, [0.0, 0.0, 0.0, np.exp(e)])
    return {"fiber_diam_bound": fiber, "base_length": periodic_trapezoid(lengths, h)}


def theorem3_row(params: InoueParams, u, u0, s: float, period: float | None = None) -> DiagnosticsRow:
    period = params.period if period is None else period
    uv, u0v = _values(u), _values(u0)
    h = period / uv.size
    q = _w_term(uv, s, period)
    bad = np.flatnonzero(q <= 0)
    if bad.size:
        raise MetricLostPositivity(int(bad[0]))
    lam_w = q / (4 + s)  # w eigenvalue of omega relative to hat; z eigenvalue is 1
    w_entry = q / (s + 1)  # omega_ww in units of alpha
    w0_entry = initial_w_term(u0v, period)
    # Ric(omega) = (omega_0 - (s+1) omega)/s; z eigenvalue vanishes since beta parts cancel
    ric_w = (w0_entry / w_entry - (s + 1)) / s
    ric_rel = np.concatenate([ric_w, [0.0]])
    tr_w0 = (s + 1) + w0_entry / w_entry  # z part: y / (y / (s + 1))
    curv = (tr_w0 - 2 * (s + 1)) / s
    trace_tr = 1.0 / (s + 1) + w_entry / 4.0
    defect = abs(
        periodic_trapezoid(np.exp(((s + 1) * uv - u0v) / s), h)
        - periodic_trapezoid(q / s, h)
    )
    gh = gh_diagnostics(params, uv, s, period)
    return DiagnosticsRow(
        s=s,
        phi_inf=float(np.max(np.abs(uv))),
        vol_ratio_min=float(np.min(lam_w)),
        vol_ratio_max=float(np.max(lam_w)),
        trace_max=float(np.max(trace_tr)),
        trace_hat_max=float(np.max(1.0 + lam_w)),
        trace_inv_hat_max=float(np.max(1.0 + 1.0 / lam_w)),
        R_min=float(np.min(curv)),
        R_max=float(np.max(curv)),
        ricci_rel_min=float(np.min(ric_rel)),
        ricci_rel_max=float(np.max(ric_rel)),
        normalization_defect=defect,
        gh_fiber_diam=gh["fiber_diam_bound"],
        gh_base_length=gh["base_length"],
        eig_dev_max=float(np.max(np.abs(lam_w - 1.0))),
    )


def problem(params: InoueParams, u0: LeafProfile) -> Problem:
    period = params.period
    if abs(u0.period - period) > 1e-12 * period:
        raise ValueError("initial profile period does not match the manifold")
    u0v = u0.values

    def guard(u, s):
        bad = np.flatnonzero(_w_term(u, s, period) <= 0)
        return (bad.size == 0, int(bad[0]) if bad.size else None)

    return Problem(
        residual=lambda u, s: reduced_residual(u, u0v, s, period),
        linearization=lambda u, s: reduced_linearization(u, s, period),
        guard=guard,
        shape=(u0.grid_size,),
        period=period,
        family=FAMILY,
        diagnostics=lambda u, s: theorem3_row(params, u, u0v, s, period),
        meta={"lambda": params.lam, "u0": u0v},
    )


def schedule(s_start: float = 1.0, s_max: float = 1e4, ratio: float = 1.5) -> list[float]:
    """Geometric ``s_{k+1} = ratio * s_k`` from ``s_start``, ending exactly at ``s_max``."""
    if not s_start > 0:
        raise ValueError("s_start must be positive")
    if not ratio > 1 or s_max < s_start:
        raise ValueError("need ratio > 1 and s_max >= s_start")
    out = [float(s_start)]
    while out[-1] * ratio < s_max * (1 - 1e-12):
        out.append(out[-1] * ratio)
    if out[-1] < s_max:
        out.append(float(s_max))
    # 12 significant digits, so the CSV column reproduces s exactly
    return [float(f"{x:.12g}") for x in out]


def random_point(rng):
    z = complex(rng.normal(), rng.normal())
    w = complex(rng.normal(), rng.uniform(0.3, 3.0))
    return z, w
