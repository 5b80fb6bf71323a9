"""Finite-difference operators on the reduced grids."""

from __future__ import annotations

import numpy as np
from scipy import sparse


class MetricLostPositivity(ValueError):
    """Assembled metric is not positive at some grid node."""

    def __init__(self, node, message: str = "metric lost positivity"):
        super().__init__(f"{message} at node {node}")
        self.node = node


def periodic_d1(u: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(u, -1) - np.roll(u, 1)) / (2.0 * h)


def periodic_d2(u: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(u, -1) - 2.0 * u + np.roll(u, 1)) / h**2


def periodic_trapezoid(values: np.ndarray, h: float) -> float:
    return float(h * np.sum(values))


def trig_interpolate(values: np.ndarray, period: float, t) -> np.ndarray:
    """Band-limited interpolant of periodic samples ``values`` at points ``t``."""
    values = np.asarray(values, dtype=float)
    n = values.size
    coef = np.fft.rfft(values) / n
    k = np.arange(coef.size)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    phase = np.exp(2j * np.pi * np.outer(t, k) / period)
    weights = np.full(coef.size, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
        # Nyquist mode: keep the cosine part only so the interpolant is real.
        phase[:, -1] = np.cos(2 * np.pi * k[-1] * t / period)
    return np.real(phase @ (weights * coef))


def trig_series(t, period: float, const: float = 0.0, cos=(), sin=()):
    """``const + sum_k cos[k-1] cos(2πkt/P) + sin[k-1] sin(2πkt/P)`` and its first two derivatives."""
    t = np.asarray(t, dtype=float)
    val = np.full_like(t, float(const))
    d1 = np.zeros_like(t)
    d2 = np.zeros_like(t)
    for k, amp in enumerate(cos, start=1):
        w = 2 * np.pi * k / period
        val += amp * np.cos(w * t)
        d1 -= amp * w * np.sin(w * t)
        d2 -= amp * w**2 * np.cos(w * t)
    for k, amp in enumerate(sin, start=1):
        w = 2 * np.pi * k / period
        val += amp * np.sin(w * t)
        d1 += amp * w * np.cos(w * t)
        d2 -= amp * w**2 * np.sin(w * t)
    return val, d1, d2


# -- 2D operators on a (periodic x bounded) grid, row-major with the bounded axis fastest.


def _periodic_matrix(n: int, h: float, order: int) -> sparse.csr_matrix:
    if order == 1:
        diags = [-1.0 / (2 * h), 0.0, 1.0 / (2 * h)]
    else:
        diags = [1.0 / h**2, -2.0 / h**2, 1.0 / h**2]
    m = sparse.diags(diags, [-1, 0, 1], shape=(n, n), format="lil")
    m[0, n - 1] = diags[0]
    m[n - 1, 0] = diags[2]
    return m.tocsr()


def _bounded_matrix(n: int, h: float, order: int) -> sparse.csr_matrix:
    """Central differences inside, second-order one-sided at both ends."""
    m = sparse.lil_matrix((n, n))
    for i in range(1, n - 1):
        if order == 1:
            m[i, i - 1] = -1.0 / (2 * h)
            m[i, i + 1] = 1.0 / (2 * h)
        else:
            m[i, i - 1] = 1.0 / h**2
            m[i, i] = -2.0 / h**2
            m[i, i + 1] = 1.0 / h**2
    if order == 1:
        left = np.array([-3.0, 4.0, -1.0]) / (2 * h)
        for k, c in enumerate(left):
            m[0, k] = c
            m[n - 1, n - 1 - k] = -c
    else:
        left = np.array([2.0, -5.0, 4.0, -1.0]) / h**2
        for k, c in enumerate(left):
            m[0, k] = c
            m[n - 1, n - 1 - k] = c
    return m.tocsr()


class Grid2D:
    """Periodic axis ``ell`` (length ``period``) times ``a`` in ``[0, 1]``.

    Node ``(i, j)`` sits at ``ell_i = i * period / n_ell`` and
    ``a_j = j / (n_a - 1)``; flattened index ``i * n_a + j``.
    """

    def __init__(self, n_ell: int, n_a: int, period: float):
        if n_ell < 16 or n_a < 17:
            raise ValueError("grid too small: need n_ell >= 16 and n_a >= 17")
        self.n_ell = n_ell
        self.n_a = n_a
        self.period = float(period)
        self.h_ell = self.period / n_ell
        self.h_a = 1.0 / (n_a - 1)
        self.ell = np.arange(n_ell) * self.h_ell
        self.a = np.linspace(0.0, 1.0, n_a)
        il = sparse.identity(n_ell, format="csr")
        ia = sparse.identity(n_a, format="csr")
        pl1 = _periodic_matrix(n_ell, self.h_ell, 1)
        pl2 = _periodic_matrix(n_ell, self.h_ell, 2)
        ba1 = _bounded_matrix(n_a, self.h_a, 1)
        ba2 = _bounded_matrix(n_a, self.h_a, 2)
        self.d_ell = sparse.kron(pl1, ia, format="csr")
        self.d_ell2 = sparse.kron(pl2, ia, format="csr")
        self.d_a = sparse.kron(il, ba1, format="csr")
        self.d_a2 = sparse.kron(il, ba2, format="csr")
        self.d_ell_a = sparse.kron(pl1, ba1, format="csr")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_ell, self.n_a)

    def derivatives(self, values: np.ndarray) -> dict[str, np.ndarray]:
        u = np.asarray(values, dtype=float).ravel()
        return {
            "l": self.d_ell @ u,
            "a": self.d_a @ u,
            "ll": self.d_ell2 @ u,
            "aa": self.d_a2 @ u,
            "la": self.d_ell_a @ u,
        }

    def operators(self) -> dict[str, sparse.csr_matrix]:
        return {
            "l": self.d_ell,
            "a": self.d_a,
            "ll": self.d_ell2,
            "aa": self.d_a2,
            "la": self.d_ell_a,
        }
