"""Pointwise algebra of real (1,1)-forms.

A real (1,1)-form ``omega = i h[j][k] dz^j ^ dz-bar^k`` is stored as its
Hermitian coefficient matrix ``h``.  For two such forms ``g`` and ``h`` with
``h`` positive definite we need the trace ``tr_h g``, the top-power ratio
``g^n / h^n = det g / det h`` and the eigenvalues of ``h^{-1} g``.

Riemannian convention
---------------------
A real tangent vector is given in real coordinates ordered
``(x_1, ..., x_n, y_1, ..., y_n)`` with ``z_j = x_j + i y_j``.  Writing
``v^z_j = v_{x_j} + i v_{y_j}``, the Riemannian metric attached to ``h`` is

    g_R(v, v) = 2 * sum_{j,k} Re( h[j][k] v^z_j conj(v^z_k) ).

So the Euclidean form ``h = I`` on C gives ``|d/dx| = sqrt(2)``.  Every
length, diameter and Gromov-Hausdorff number in this package uses this
convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

HERMITIAN_RTOL = 1e-12
POSITIVITY_TOL = 1e-12


class NotPositiveError(ValueError):
    """The reference form is not positive definite."""


@dataclass(frozen=True)
class HermitianForm:
    """Coefficient matrix of a real (1,1)-form at one point.

    ``entries[j, k]`` multiplies ``i dz^j ^ dz-bar^k``.  The matrix is checked
    for Hermiticity on construction and made read-only.
    """

    entries: np.ndarray
    base_point: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        h = np.array(self.entries, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError(f"coefficient matrix must be square, got shape {h.shape}")
        scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
        if np.max(np.abs(h - h.conj().T), initial=0.0) > HERMITIAN_RTOL * scale:
            raise ValueError("coefficient matrix is not Hermitian")
        # Remove the rounding-level anti-Hermitian part so later algebra is exact.
        h = 0.5 * (h + h.conj().T)
        h.setflags(write=False)
        object.__setattr__(self, "entries", h)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def diag(cls, values, base_point=None) -> "HermitianForm":
        return cls(np.diag(np.asarray(values, dtype=complex)), base_point)

    @classmethod
    def identity(cls, n: int) -> "HermitianForm":
        return cls(np.eye(n, dtype=complex))

    def __add__(self, other: "HermitianForm") -> "HermitianForm":
        _check_dims(self, other)
        return HermitianForm(self.entries + other.entries, self.base_point)

    def __sub__(self, other: "HermitianForm") -> "HermitianForm":
        _check_dims(self, other)
        return HermitianForm(self.entries - other.entries, self.base_point)

    def __mul__(self, c: float) -> "HermitianForm":
        return HermitianForm(float(c) * self.entries, self.base_point)

    __rmul__ = __mul__

    def __truediv__(self, c: float) -> "HermitianForm":
        return HermitianForm(self.entries / float(c), self.base_point)

    def __neg__(self) -> "HermitianForm":
        return HermitianForm(-self.entries, self.base_point)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def det(self) -> float:
        return float(np.real(np.linalg.det(self.entries)))


def _check_dims(g: HermitianForm, h: HermitianForm) -> None:
    if g.dim != h.dim:
        raise ValueError(f"dimension mismatch: {g.dim} vs {h.dim}")


def _cholesky(h: HermitianForm) -> np.ndarray:
    try:
        return linalg.cholesky(h.entries, lower=True)
    except linalg.LinAlgError:
        raise NotPositiveError("reference metric not positive") from None


def relative_eigenvalues(g: HermitianForm, h: HermitianForm) -> np.ndarray:
    """Eigenvalues of ``h^{-1} g`` in ascending order.

    Solved as the Hermitian generalized problem ``g v = lam h v`` reduced by
    the Cholesky factor of ``h``; the result is real.
    """
    _check_dims(g, h)
    chol = _cholesky(h)
    a = linalg.solve_triangular(chol, g.entries, lower=True)
    a = linalg.solve_triangular(chol, a.conj().T, lower=True).conj().T
    a = 0.5 * (a + a.conj().T)
    return np.linalg.eigvalsh(a)


def trace_of(g: HermitianForm, h: HermitianForm) -> float:
    """Trace of ``g`` with respect to the positive form ``h``: ``h^{j k-bar} g_{k-bar j}``."""
    _check_dims(g, h)
    chol = _cholesky(h)
    # tr(h^{-1} g) = tr(L^{-1} g L^{-H})
    a = linalg.solve_triangular(chol, g.entries, lower=True)
    a = linalg.solve_triangular(chol, a.conj().T, lower=True)
    return float(np.real(np.trace(a)))


def wedge_ratio(g: HermitianForm, h: HermitianForm) -> float:
    """Ratio ``g^n / h^n``, i.e. ``det g / det h``."""
    _check_dims(g, h)
    dh = h.det()
    scale = float(np.max(np.abs(h.entries))) ** h.dim if h.dim else 1.0
    if scale == 0.0 or abs(dh) <= 1e-300 or abs(dh) <= 1e-14 * scale:
        raise ValueError("reference form is singular")
    return g.det() / dh


def is_positive(h: HermitianForm, tol: float = POSITIVITY_TOL) -> bool:
    return bool(np.min(h.eigenvalues()) > tol)


def riemannian_quadratic_form(h: HermitianForm) -> np.ndarray:
    """Real ``2n x 2n`` matrix ``G`` with ``g_R(v, v) = v^T G v``.

    Coordinates are ordered ``(x_1..x_n, y_1..y_n)``.  With ``h = A + iB``
    (A symmetric, B antisymmetric) one gets ``G = 2 [[A, B], [-B, A]]``.
    """
    a = np.real(h.entries)
    b = np.imag(h.entries)
    return 2.0 * np.block([[a, b], [-b, a]])


def riemannian_length_factor(h: HermitianForm, v) -> float:
    """Riemannian length of the real tangent vector ``v`` under ``h``.

    ``v`` has length ``2n`` ordered ``(x_1..x_n, y_1..y_n)``; see the module
    docstring for the normalisation.  ``h`` may be semidefinite.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (2 * h.dim,):
        raise ValueError(f"tangent vector must have shape ({2 * h.dim},)")
    # Degenerate limit forms such as alpha are allowed; negative directions are not.
    scale = max(1.0, float(np.max(np.abs(h.entries))))
    if np.min(h.eigenvalues()) < -POSITIVITY_TOL * scale:
        raise NotPositiveError("reference metric not positive")
    vz = v[: h.dim] + 1j * v[h.dim :]
    q = 2.0 * np.real(vz @ h.entries @ vz.conj())
    return float(np.sqrt(max(q, 0.0)))
