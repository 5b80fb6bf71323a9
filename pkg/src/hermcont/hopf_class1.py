"""Class-1 Hopf surfaces: Gauduchon-Ornea geometry and the torus-invariant reduction.

Everything is expressed through ``ell = log Phi`` where ``Phi`` solves
``|z|^2 Phi^{-2 g1} + |w|^2 Phi^{-2 g2} = 1``.  With ``a = |z|^2 Phi^{-2 g1}``
and ``b = 1 - a`` the implicit derivatives are

    ell_z = conj(z) Phi^{-2 g1} / (2 D),   D = g1 a + g2 b,

and ``omega_GO = i∂∂̄ell + i∂ell ^ ∂̄ell``, ``Theta = i∂ell ^ ∂̄ell``, so that
``Ric(chi) = 2 i∂∂̄ell = 2 (omega_GO - Theta)``.

Invariant potentials are written ``phi = U(ell, a)``: ``ell`` is periodic
with period ``L = log|alpha| + log|beta|`` under the deck map and
``a in [0, 1]`` closes up at the two elliptic fibres ``z = 0`` (``a = 0``)
and ``w = 0`` (``a = 1``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .ambient_oracle import complex_hessian_fd
from .discretize import Grid2D, MetricLostPositivity, trig_series
from .estimates import DiagnosticsRow
from .hopf_round import OutsideExistenceInterval, halving_schedule
from .solver import Problem
from .tensor_core import HermitianForm

FAMILY = "hopf_class1"
# Rounding floor of the 2D residual grows like eps / h_a^2 / (1 - 2s).
NEWTON_TOL = 1e-10


class ReductionInconsistent(AssertionError):
    pass


@dataclass(frozen=True)
class HopfClass1Params:
    mod_a: float
    mod_b: float

    def __post_init__(self):
        if not (1 < self.mod_a <= self.mod_b):
            raise ValueError("need 1 < |alpha| <= |beta|")

    @property
    def gamma1(self) -> float:
        la, lb = np.log(self.mod_a), np.log(self.mod_b)
        return la / (la + lb)

    @property
    def gamma2(self) -> float:
        la, lb = np.log(self.mod_a), np.log(self.mod_b)
        return lb / (la + lb)

    @property
    def c_deck(self) -> float:
        return self.mod_a * self.mod_b

    @property
    def period(self) -> float:
        return float(np.log(self.c_deck))

    def deck(self, z, w, k: int = 1):
        return z * self.mod_a**k, w * self.mod_b**k


@dataclass(frozen=True)
class InvariantProfile2D:
    """``U[i, j]`` at ``ell_i = i L / N_ell`` and ``a_j = j / (N_a - 1)``."""

    values: np.ndarray
    period: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 16 or v.shape[1] < 17:
            raise ValueError("need an N_ell x N_a grid with N_ell >= 16, N_a >= 17")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape

    @classmethod
    def zeros(cls, period: float, n_ell: int = 128, n_a: int = 65):
        return cls(np.zeros((n_ell, n_a)), period)

    @classmethod
    def from_series(cls, period: float, n_ell: int = 128, n_a: int = 65, const: float = 0.0,
                    cos=(), sin=(), a_poly=()):
        """``const + trig(ell) + sum_m a_poly[m-1] a^m``."""
        ell = np.arange(n_ell) * period / n_ell
        a = np.linspace(0, 1, n_a)
        t = trig_series(ell, period, const, cos, sin)[0]
        p = sum(c * a ** (m + 1) for m, c in enumerate(a_poly)) if len(a_poly) else np.zeros_like(a)
        return cls(t[:, None] + np.asarray(p)[None, :], period)


def _moduli(params, z, w):
    z2, w2 = abs(z) ** 2, abs(w) ** 2
    if z2 == 0 and w2 == 0:
        raise ValueError("Phi is undefined at the origin")
    return params.gamma1, params.gamma2, z2, w2


def log_phi(params: HopfClass1Params, z: complex, w: complex) -> float:
    """``log Phi`` by bracketing plus safeguarded Newton.

    ``g(ell) = |z|^2 e^{-2 g1 ell} + |w|^2 e^{-2 g2 ell} - 1`` is strictly
    decreasing and convex.
    """
    g1, g2, z2, w2 = _moduli(params, z, w)
    if w2 == 0:
        return np.log(z2) / (2 * g1)
    if z2 == 0:
        return np.log(w2) / (2 * g2)

    def g(x):
        return z2 * np.exp(-2 * g1 * x) + w2 * np.exp(-2 * g2 * x) - 1.0

    def dg(x):
        return -2 * g1 * z2 * np.exp(-2 * g1 * x) - 2 * g2 * w2 * np.exp(-2 * g2 * x)

    # Each term alone gives a bound: g(lo) >= 0 >= g(hi).
    c1 = np.log(z2) / (2 * g1)
    c2 = np.log(w2) / (2 * g2)
    lo, hi = max(c1, c2), max(c1, c2) + np.log(2.0) / (2 * min(g1, g2))
    x = hi
    for _ in range(200):
        gx = g(x)
        if gx > 0:
            lo = x
        else:
            hi = x
        step = gx / dg(x)
        xn = x - step
        if not (lo <= xn <= hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 1e-16 * max(1.0, abs(x)):
            x = xn
            break
        x = xn
    return float(x)


def phi_solve(params: HopfClass1Params, z: complex, w: complex) -> float:
    return float(np.exp(log_phi(params, z, w)))


def defining_residual(params: HopfClass1Params, z: complex, w: complex) -> float:
    """Relative residual of the implicit equation at the computed ``Phi``."""
    g1, g2, z2, w2 = _moduli(params, z, w)
    x = log_phi(params, z, w)
    t1, t2 = z2 * np.exp(-2 * g1 * x), w2 * np.exp(-2 * g2 * x)
    return abs(t1 + t2 - 1.0) / max(t1 + t2, 1.0)


@dataclass(frozen=True)
class LogPhiJet:
    """``ell = log Phi`` with first derivatives, ``∂∂̄`` and holomorphic Hessian at a point."""

    ell: float
    a: float
    d: np.ndarray  # (∂_z ell, ∂_w ell)
    ddbar: np.ndarray  # [j, k] = ∂_j ∂_k̄ ell
    dd: np.ndarray  # [j, k] = ∂_j ∂_k ell
    da: np.ndarray  # ∂_j a
    a_ddbar: np.ndarray  # ∂_j ∂_k̄ a


def log_phi_jet(params: HopfClass1Params, z: complex, w: complex) -> LogPhiJet:
    g1, g2, _, _ = _moduli(params, z, w)
    x = log_phi(params, z, w)
    e = np.array([np.exp(-2 * g1 * x), np.exp(-2 * g2 * x)])
    gam = np.array([g1, g2])
    p = np.array([z, w], dtype=complex)
    t = np.abs(p) ** 2 * e  # (a, b)
    big_d = float(gam @ t)
    # G(p, ell) = sum |p_j|^2 e_j - 1, G_ell = -2 D
    g_j = p.conj() * e  # ∂_j G
    g_jl = -2 * gam * p.conj() * e  # ∂_j ∂_ell G
    g_ll = float(4 * (gam**2) @ t)
    d = g_j / (2 * big_d)
    dbar = d.conj()
    # ∂_j∂_k̄ G = delta_jk e_j ; ∂_j∂_k G = 0
    ddbar = (np.diag(e) + np.outer(g_jl, dbar) + np.outer(d, g_jl.conj()) + g_ll * np.outer(d, dbar)) / (2 * big_d)
    dd = (np.outer(g_jl, d) + np.outer(d, g_jl) + g_ll * np.outer(d, d)) / (2 * big_d)
    # a = |z|^2 e_1
    ez = np.array([1.0, 0.0])
    da = ez * p[0].conj() * e[0] - 2 * g1 * t[0] * d
    # ∂_k̄ a = ez_k z e_1 - 2 g1 a ∂_k̄ ell
    a_ddbar = (
        np.outer(ez, ez) * e[0]
        - 2 * g1 * p[0] * e[0] * np.outer(d, ez)
        - 2 * g1 * (np.outer(da, dbar) + t[0] * ddbar)
    )
    return LogPhiJet(x, float(t[0]), d, 0.5 * (ddbar + ddbar.conj().T), dd, da,
                     0.5 * (a_ddbar + a_ddbar.conj().T))


def phi_derivatives(params: HopfClass1Params, z: complex, w: complex) -> dict:
    """First derivatives, ``∂∂̄`` matrix and holomorphic second derivatives of ``Phi``."""
    jet = log_phi_jet(params, z, w)
    phi = np.exp(jet.ell)
    first = phi * jet.d
    second = phi * (jet.ddbar + np.outer(jet.d, jet.d.conj()))
    holo = phi * (jet.dd + np.outer(jet.d, jet.d))
    return {
        "phi": phi,
        "first": first,
        "second": HermitianForm(second, (z, w)),
        "holomorphic": np.array([holo[0, 0], holo[0, 1], holo[1, 1]]),
    }


def _forms(params, z, w):
    jet = log_phi_jet(params, z, w)
    theta = np.outer(jet.d, jet.d.conj())
    return jet, theta


def go_metric(params: HopfClass1Params, z, w) -> HermitianForm:
    jet, theta = _forms(params, z, w)
    return HermitianForm(jet.ddbar + theta, (z, w))


def theta_form(params: HopfClass1Params, z, w) -> HermitianForm:
    _, theta = _forms(params, z, w)
    return HermitianForm(theta, (z, w))


def chi_metric(params: HopfClass1Params, z, w) -> HermitianForm:
    x = log_phi(params, z, w)
    return HermitianForm.diag([np.exp(-2 * params.gamma1 * x), np.exp(-2 * params.gamma2 * x)], (z, w))


def ric_chi(params: HopfClass1Params, z, w) -> HermitianForm:
    """Closed form ``2 (omega_GO - Theta)``."""
    jet, _ = _forms(params, z, w)
    return HermitianForm(2.0 * jet.ddbar, (z, w))


def omega_hat_s(params: HopfClass1Params, s: float, z, w) -> HermitianForm:
    """``(1 - 2s) omega_GO + 2s Theta`` for ``0 <= s < 1/2``."""
    if not 0 <= s < 0.5:
        raise OutsideExistenceInterval("outside existence interval")
    jet, theta = _forms(params, z, w)
    return HermitianForm((1 - 2 * s) * (jet.ddbar + theta) + 2 * s * theta, (z, w))


def f_function(params: HopfClass1Params, z, w) -> float:
    """``log(omega_GO^2 / chi^2)``."""
    return float(np.log(go_metric(params, z, w).det() / chi_metric(params, z, w).det()))


def point_at(params: HopfClass1Params, ell: float, a: float) -> tuple[complex, complex]:
    """Representative point (real, nonnegative coordinates) with invariants ``(ell, a)``."""
    z = np.sqrt(max(a, 0.0) * np.exp(2 * params.gamma1 * ell))
    w = np.sqrt(max(1.0 - a, 0.0) * np.exp(2 * params.gamma2 * ell))
    return complex(z), complex(w)


def invariant_hessian(jet: LogPhiJet, du: dict) -> np.ndarray:
    """Chain rule for ``i∂∂̄ U(ell, a)`` given partials ``du`` (keys l, a, ll, aa, la)."""
    dl, da = jet.d, jet.da
    return (
        du["l"] * jet.ddbar
        + du["a"] * jet.a_ddbar
        + du["ll"] * np.outer(dl, dl.conj())
        + du["aa"] * np.outer(da, da.conj())
        + du["la"] * (np.outer(dl, da.conj()) + np.outer(da, dl.conj()))
    )


class Class1Grid:
    """Node geometry on the ``(ell, a)`` grid, computed once per grid.

    Stores, per node, the Hermitian coefficient matrices multiplying each
    partial derivative of ``U`` in ``i∂∂̄phi``, plus ``omega_GO``, ``Theta``
    and ``f``.
    """

    KEYS = ("l", "a", "ll", "aa", "la")

    def __init__(self, params: HopfClass1Params, n_ell: int = 128, n_a: int = 65):
        self.params = params
        self.grid = Grid2D(n_ell, n_a, params.period)
        n = n_ell * n_a
        self.coeff = {k: np.empty((n, 2, 2), dtype=complex) for k in self.KEYS}
        self.go = np.empty((n, 2, 2), dtype=complex)
        self.theta = np.empty((n, 2, 2), dtype=complex)
        self.f = np.empty(n)
        self.points = []
        idx = 0
        for ell in self.grid.ell:
            for a in self.grid.a:
                z, w = point_at(params, ell, a)
                jet = log_phi_jet(params, z, w)
                dl, da = jet.d, jet.da
                self.coeff["l"][idx] = jet.ddbar
                self.coeff["a"][idx] = jet.a_ddbar
                self.coeff["ll"][idx] = np.outer(dl, dl.conj())
                self.coeff["aa"][idx] = np.outer(da, da.conj())
                self.coeff["la"][idx] = np.outer(dl, da.conj()) + np.outer(da, dl.conj())
                th = np.outer(dl, dl.conj())
                self.theta[idx] = th
                self.go[idx] = jet.ddbar + th
                chi_det = np.exp(-2 * (params.gamma1 + params.gamma2) * jet.ell)
                self.f[idx] = np.log(_det2(self.go[idx][None])[0] / chi_det)
                self.points.append((z, w))
                idx += 1

    @property
    def shape(self):
        return self.grid.shape

    def hat(self, s: float) -> np.ndarray:
        return (1 - 2 * s) * self.go + 2 * s * self.theta

    def ddbar(self, values) -> np.ndarray:
        du = self.grid.derivatives(values)
        out = np.zeros_like(self.go)
        for k in self.KEYS:
            out += du[k][:, None, None] * self.coeff[k]
        return out

    def check_reduction(self, nodes=None, tol: float = 1e-4, step: float = 1e-3) -> float:
        """Compare the chain-rule coefficients with the ambient oracle on test potentials."""
        p = self.params
        n_ell, n_a = self.shape
        if nodes is None:
            nodes = [(n_ell // 3, n_a // 3), (2 * n_ell // 3, n_a // 2), (n_ell // 5, 3 * n_a // 4)]
        worst = 0.0
        for i, j in nodes:
            z, w = self.points[i * n_a + j]
            jet = log_phi_jet(p, z, w)
            for key, func in (("l", lambda q: log_phi(p, q[0], q[1])),
                              ("a", lambda q: abs(q[0]) ** 2 * np.exp(-2 * p.gamma1 * log_phi(p, q[0], q[1])))):
                fd = complex_hessian_fd(func, [z, w], step).entries
                exact = jet.ddbar if key == "l" else jet.a_ddbar
                worst = max(worst, float(np.max(np.abs(fd - exact))))
        if worst > tol:
            raise ReductionInconsistent(f"reduction inconsistent (max defect {worst:.2e})")
        return worst


def _det2(m: np.ndarray) -> np.ndarray:
    return np.real(m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0])


def _tr_inv(m: np.ndarray, k: np.ndarray, det: np.ndarray) -> np.ndarray:
    """``tr(m^{-1} k)`` for stacks of 2x2 Hermitian matrices."""
    return np.real(m[:, 1, 1] * k[:, 0, 0] + m[:, 0, 0] * k[:, 1, 1]
                   - 2 * np.real(np.conj(m[:, 0, 1]) * k[:, 0, 1])) / det


def _positive(m: np.ndarray) -> np.ndarray:
    return (np.real(m[:, 0, 0]) > 0) & (_det2(m) > 0)


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, InvariantProfile2D) else np.asarray(u, dtype=float)


def _assemble(geo: Class1Grid, u, s):
    hat = geo.hat(s)
    omega = hat + geo.ddbar(u)
    ok = _positive(omega)
    if not np.all(ok):
        bad = int(np.flatnonzero(~ok)[0])
        raise MetricLostPositivity(np.unravel_index(bad, geo.shape))
    return hat, omega


def reduced_residual_2d(geo: Class1Grid, u, u0, s: float) -> np.ndarray:
    """``log(omega^2 / hat^2) - (U - U0)/s + f`` at every node."""
    if not 0 < s < 0.5:
        raise OutsideExistenceInterval("outside existence interval")
    uv, u0v = _values(u).ravel(), _values(u0).ravel()
    hat, omega = _assemble(geo, uv, s)
    res = np.log(_det2(omega) / _det2(hat)) - (uv - u0v) / s + geo.f
    return res.reshape(geo.shape)


def reduced_linearization_2d(geo: Class1Grid, u, s: float):
    if not 0 < s < 0.5:
        raise OutsideExistenceInterval("outside existence interval")
    uv = _values(u).ravel()
    _, omega = _assemble(geo, uv, s)
    det = _det2(omega)
    ops = geo.grid.operators()
    jac = sparse.diags(np.full(uv.size, -1.0 / s))
    for k in Class1Grid.KEYS:
        c = _tr_inv(omega, geo.coeff[k], det)
        jac = jac + sparse.diags(c) @ ops[k]
    return sparse.csr_matrix(jac)


def check_initial_data(geo: Class1Grid, u0) -> None:
    omega0 = geo.go + geo.ddbar(_values(u0).ravel())
    ok = _positive(omega0)
    if not np.all(ok):
        bad = int(np.flatnonzero(~ok)[0])
        raise MetricLostPositivity(np.unravel_index(bad, geo.shape), "initial metric not positive")


def curvature_row(geo: Class1Grid, u, u0, s: float) -> DiagnosticsRow:
    uv, u0v = _values(u).ravel(), _values(u0).ravel()
    hat, omega = _assemble(geo, uv, s)
    omega0 = geo.go + geo.ddbar(u0v)
    det = _det2(omega)
    vol = det / _det2(hat)
    tr_go = _tr_inv(geo.go, omega, _det2(geo.go))
    curv = (_tr_inv(omega, omega0, det) - 2.0) / s
    return DiagnosticsRow(
        s=s,
        phi_inf=float(np.max(np.abs(uv))),
        vol_ratio_min=float(np.min(vol)),
        vol_ratio_max=float(np.max(vol)),
        trace_max=float(np.max(tr_go)),
        R_min=float(np.min(curv)),
        R_max=float(np.max(curv)),
    )


def c0_bound(geo: Class1Grid, u0) -> float:
    """``||phi_0|| + ||f|| / 2``, the explicit sup bound from the maximum principle."""
    return float(np.max(np.abs(_values(u0))) + 0.5 * np.max(np.abs(geo.f)))


def problem(params: HopfClass1Params, u0: InvariantProfile2D, geo: Class1Grid | None = None) -> Problem:
    if geo is None:
        geo = Class1Grid(params, *u0.shape)
    if geo.shape != u0.shape:
        raise ValueError("initial profile does not match the grid")
    geo.check_reduction()
    u0v = u0.values

    def guard(u, s):
        omega = geo.hat(s) + geo.ddbar(np.ravel(u))
        ok = _positive(omega)
        if np.all(ok):
            return True, None
        return False, np.unravel_index(int(np.flatnonzero(~ok)[0]), geo.shape)

    return Problem(
        residual=lambda u, s: reduced_residual_2d(geo, u, u0v, s),
        linearization=lambda u, s: reduced_linearization_2d(geo, u, s),
        guard=guard,
        shape=geo.shape,
        period=params.period,
        family=FAMILY,
        diagnostics=lambda u, s: curvature_row(geo, u, u0v, s),
        tol=NEWTON_TOL,
        meta={"geometry": geo, "u0": u0v},
    )


def schedule(s_start: float = 1e-3, end_offset: float = 1e-4) -> list[float]:
    return halving_schedule(0.5, s_start, end_offset, "s_start must lie in (0, 1/2)")


def random_point(rng, params: HopfClass1Params | None = None):
    """Random point of C^2 with both coordinates comfortably away from 0."""
    r = rng.uniform(0.5, 2.0, size=2)
    th = rng.uniform(0, 2 * np.pi, size=2)
    return complex(r[0] * np.exp(1j * th[0])), complex(r[1] * np.exp(1j * th[1]))
