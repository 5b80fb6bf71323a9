"""Closed-form identities checked against the finite-difference oracle.

Each suite samples seeded random points of the covering space and reports
the worst error per identity.  Oracle-based identities are held to 1e-6,
purely algebraic ones to 1e-12 (relative to the size of the compared
quantity).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import hopf_class1 as c1
from . import hopf_round as hr
from . import inoue
from .ambient_oracle import MetricField, complex_hessian_fd, log_volume_hessian_check, ricci_fd
from .tensor_core import wedge_ratio

ORACLE_TOL = 1e-6
ALGEBRAIC_TOL = 1e-12


@dataclass(frozen=True)
class IdentityResult:
    name: str
    max_error: float
    tol: float
    samples: int

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_error) and self.max_error <= self.tol)

    def line(self) -> str:
        flag = "ok" if self.passed else "FAIL"
        return f"{self.name:<28s} max error {self.max_error:.3e} (tol {self.tol:.0e}) {flag}"


def _run(checks: dict[str, tuple[float, Callable]], rng, samples: int) -> list[IdentityResult]:
    out = []
    for name, (tol, fn) in checks.items():
        worst = max(float(fn(rng)) for _ in range(samples))
        out.append(IdentityResult(name, worst, tol, samples))
    return out


def _maxabs(a, b) -> float:
    return float(np.max(np.abs(a.entries - b.entries)))


def _rel(x: float, ref: float) -> float:
    return abs(x - ref) / max(1.0, abs(ref))


def hopf_round_suite(params: hr.HopfRoundParams, rng, samples: int = 100) -> list[IdentityResult]:
    n, m = params.n, params.modulus

    def ricci(rng):
        p = hr.random_point(rng, n)
        return _maxabs(ricci_fd(MetricField(n, hr.hopf_metric), p), hr.hopf_ricci(p))

    def det_identity(rng):
        p = hr.random_point(rng, n)
        s = rng.uniform(0, 1.0 / n)
        return _rel(wedge_ratio(hr.omega_hat(s, p), hr.hopf_metric(p)), (1 - n * s) ** (n - 1))

    def hat_ricci(rng):
        p = hr.random_point(rng, n)
        s = rng.uniform(0, 0.9 / n)
        field = MetricField(n, lambda q: hr.omega_hat(s, q))
        return _maxabs(ricci_fd(field, p), hr.hopf_ricci(p))

    def deck(rng):
        p = hr.random_point(rng, n)
        return _maxabs(hr.hopf_metric(m * p) * m**2, hr.hopf_metric(p))

    return _run({
        "Ric(omega_H) closed form": (ORACLE_TOL, ricci),
        "hat^n = (1-ns)^(n-1) H^n": (ALGEBRAIC_TOL, det_identity),
        "Ric(hat) = Ric(omega_H)": (ORACLE_TOL, hat_ricci),
        "deck scaling of omega_H": (ALGEBRAIC_TOL, deck),
    }, rng, samples)


def hopf_class1_suite(params: c1.HopfClass1Params, rng, samples: int = 100) -> list[IdentityResult]:
    def point(rng):
        return np.array(c1.random_point(rng, params))

    def defining(rng):
        return c1.defining_residual(params, *point(rng))

    def homogeneity(rng):
        z, w = point(rng)
        big = c1.phi_solve(params, *params.deck(z, w))
        return _rel(big / params.c_deck, c1.phi_solve(params, z, w))

    def go_oracle(rng):
        p = point(rng)
        phi = c1.phi_solve(params, *p)
        hess = complex_hessian_fd(lambda q: c1.phi_solve(params, *q), p)
        return float(np.max(np.abs(hess.entries / phi - c1.go_metric(params, *p).entries)))

    def ric_chi(rng):
        p = point(rng)
        field = MetricField(2, lambda q: c1.chi_metric(params, *q))
        return _maxabs(ricci_fd(field, p), c1.ric_chi(params, *p))

    def det_identity(rng):
        p = point(rng)
        s = rng.uniform(0, 0.5)
        return _rel(wedge_ratio(c1.omega_hat_s(params, s, *p), c1.go_metric(params, *p)), 1 - 2 * s)

    def theta_le_go(rng):
        p = point(rng)
        gap = (c1.go_metric(params, *p) - c1.theta_form(params, *p)).eigenvalues()
        return max(0.0, -float(gap[0]))

    def hat_ricci(rng):
        p = point(rng)
        s = rng.uniform(0, 0.45)
        hat = MetricField(2, lambda q: c1.omega_hat_s(params, s, *q))
        go = MetricField(2, lambda q: c1.go_metric(params, *q))
        return _maxabs(ricci_fd(hat, p), ricci_fd(go, p))

    def f_deck(rng):
        z, w = point(rng)
        return abs(c1.f_function(params, *params.deck(z, w)) - c1.f_function(params, z, w))

    return _run({
        "Phi defining equation": (ALGEBRAIC_TOL, defining),
        "Phi deck homogeneity": (ALGEBRAIC_TOL, homogeneity),
        "omega_GO = i ddbar Phi / Phi": (ORACLE_TOL, go_oracle),
        "Ric(chi) = 2(GO - Theta)": (ORACLE_TOL, ric_chi),
        "hat^2 = (1-2s) GO^2": (ALGEBRAIC_TOL, det_identity),
        "Theta <= omega_GO": (ALGEBRAIC_TOL, theta_le_go),
        "Ric(hat) = Ric(omega_GO)": (ORACLE_TOL, hat_ricci),
        "f deck invariance": (1e-10, f_deck),
    }, rng, samples)


def inoue_suite(params: inoue.InoueParams, rng, samples: int = 100) -> list[IdentityResult]:
    def log_volume(rng):
        return log_volume_hessian_check(np.array(inoue.random_point(rng)))

    def tricerri_ricci(rng):
        p = np.array(inoue.random_point(rng))
        field = MetricField(2, lambda q: inoue.tricerri(q[1]))
        return _maxabs(ricci_fd(field, p), -inoue.alpha_form(p[1]))

    def hat_ricci(rng):
        p = np.array(inoue.random_point(rng))
        s = rng.uniform(0, 100)
        field = MetricField(2, lambda q: inoue.omega_hat(s, q[1]))
        return _maxabs(ricci_fd(field, p), -inoue.alpha_form(p[1]))

    def tricerri_volume(rng):
        _, w = inoue.random_point(rng)
        # omega^2 = 2 det(g) dV and alpha ^ omega_Tr = alpha ^ beta = Omega
        return _rel(2 * inoue.tricerri(w).det() / inoue.omega_coefficient(w), 8.0)

    def deck(rng):
        z, w = inoue.random_point(rng)
        g = inoue.tricerri(w)
        moved = inoue.tricerri(params.lam * w)
        scale = np.diag([abs(params.mu), params.lam])
        return float(np.max(np.abs(scale @ moved.entries @ scale - g.entries)))

    return _run({
        "i ddbar log Omega = alpha": (ORACLE_TOL, log_volume),
        "Ric(omega_Tr) = -alpha": (ORACLE_TOL, tricerri_ricci),
        "Ric(hat) = -alpha": (ORACLE_TOL, hat_ricci),
        "omega_Tr^2 = 8 Omega": (ALGEBRAIC_TOL, tricerri_volume),
        "deck invariance of omega_Tr": (ALGEBRAIC_TOL, deck),
    }, rng, samples)


def run_suite(family: str, params, seed: int = 0, samples: int = 100) -> list[IdentityResult]:
    rng = np.random.default_rng(seed)
    suites = {"hopf_round": hopf_round_suite, "hopf_class1": hopf_class1_suite, "inoue": inoue_suite}
    if family not in suites:
        raise ValueError(f"unknown family {family!r}")
    return suites[family](params, rng, samples)
