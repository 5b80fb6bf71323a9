"""Damped Newton and parameter continuation for the reduced scalar equations.

Each family module packages its residual, Jacobian and positivity guard into
a :class:`Problem`.  Profiles are plain ``numpy`` arrays of the problem's
``shape``; Jacobians are either a :class:`CyclicTridiagonal` (1D periodic
grids) or a ``scipy.sparse`` matrix (2D grids).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-11
MAX_ITER = 50
ARMIJO = 1e-4
MAX_BISECTIONS = 10
JACOBIAN_CHECK_TOL = 1e-6


class NoConvergence(RuntimeError):
    def __init__(self, message: str, history=()):
        super().__init__(message)
        self.history = list(history)


class LeftEllipticCone(RuntimeError):
    pass


class JacobianSingular(RuntimeError):
    pass


class JacobianMismatch(AssertionError):
    pass


@dataclass(frozen=True)
class CyclicTridiagonal:
    """Row ``i`` reads ``lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]``, indices mod N."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.size

    def __matmul__(self, x):
        x = np.asarray(x)
        return self.lower * np.roll(x, 1) + self.diag * x + self.upper * np.roll(x, -1)

    def todense(self) -> np.ndarray:
        n = self.size
        m = np.zeros((n, n))
        idx = np.arange(n)
        m[idx, idx] += self.diag
        m[idx, (idx - 1) % n] += self.lower
        m[idx, (idx + 1) % n] += self.upper
        return m

    def tosparse(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(self.todense())


def _thomas(lower, diag, upper, rhs):
    """Plain tridiagonal elimination; ``lower[0]`` and ``upper[-1]`` are ignored."""
    n = diag.size
    c = np.empty(n)
    d = np.empty(n)
    piv = diag[0]
    if piv == 0.0:
        raise JacobianSingular("Jacobian singular")
    c[0] = upper[0] / piv
    d[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - lower[i] * c[i - 1]
        if piv == 0.0 or not np.isfinite(piv):
            raise JacobianSingular("Jacobian singular")
        c[i] = upper[i] / piv if i < n - 1 else 0.0
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / piv
    x = np.empty(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def solve_cyclic_tridiagonal(op: CyclicTridiagonal, rhs) -> np.ndarray:
    """Sherman-Morrison reduction of the cyclic system to two tridiagonal solves."""
    rhs = np.asarray(rhs, dtype=float)
    n = op.size
    if n < 3:
        return np.linalg.solve(op.todense(), rhs)
    a, b, c = op.lower, op.diag.astype(float).copy(), op.upper
    alpha = c[-1]  # entry (n-1, 0)
    beta = a[0]  # entry (0, n-1)
    gamma = -b[0] if b[0] != 0 else -1.0
    b[0] -= gamma
    b[-1] -= alpha * beta / gamma
    x = _thomas(a, b, c, rhs)
    u = np.zeros(n)
    u[0] = gamma
    u[-1] = alpha
    z = _thomas(a, b, c, u)
    denom = 1.0 + z[0] + beta * z[-1] / gamma
    if denom == 0.0 or not np.isfinite(denom):
        raise JacobianSingular("Jacobian singular")
    fact = (x[0] + beta * x[-1] / gamma) / denom
    return x - fact * z


def linear_solve(op, rhs, rtol: float = 1e-12) -> np.ndarray:
    """Direct solve of ``op x = rhs``.

    Cyclic tridiagonal operators use periodic Thomas elimination; sparse
    operators go through a sparse LU factorisation.  The backward error
    ``|op x - rhs| / (|op| |x| + |rhs|)`` is checked against ``rtol``.
    """
    rhs = np.asarray(rhs, dtype=float)
    if isinstance(op, CyclicTridiagonal):
        x = solve_cyclic_tridiagonal(op, rhs)
    elif sparse.issparse(op):
        try:
            with np.errstate(all="raise"):
                x = splinalg.splu(sparse.csc_matrix(op)).solve(rhs)
        except (RuntimeError, FloatingPointError) as exc:
            raise JacobianSingular("Jacobian singular") from exc
    else:
        op = np.asarray(op, dtype=float)
        try:
            x = np.linalg.solve(op, rhs)
        except np.linalg.LinAlgError as exc:
            raise JacobianSingular("Jacobian singular") from exc
    if not np.all(np.isfinite(x)):
        raise JacobianSingular("Jacobian singular")
    res = np.max(np.abs(op @ x - rhs))
    scale = _op_norm(op) * np.max(np.abs(x)) + np.max(np.abs(rhs))
    if scale > 0 and res > rtol * scale:
        raise JacobianSingular(f"Jacobian singular (linear residual {res / scale:.2e})")
    # a tiny backward error can hide a useless step when x blows up
    if res > 0.5 * np.max(np.abs(rhs)):
        raise JacobianSingular("Jacobian singular (step does not reduce the linear residual)")
    return x


def _op_norm(op) -> float:
    if isinstance(op, CyclicTridiagonal):
        return float(np.max(np.abs(op.lower) + np.abs(op.diag) + np.abs(op.upper)))
    if sparse.issparse(op):
        return float(abs(op).sum(axis=1).max())
    return float(np.max(np.sum(np.abs(op), axis=1)))


@dataclass
class Problem:
    """A reduced scalar equation ``F(u, s) = 0`` on a fixed grid.

    ``guard(u, s)`` returns ``(True, None)`` inside the elliptic cone and
    ``(False, node)`` otherwise.  ``diagnostics(u, s)`` is optional and
    produces the per-step monitor row.
    """

    residual: Callable[[np.ndarray, float], np.ndarray]
    linearization: Callable[[np.ndarray, float], Any]
    guard: Callable[[np.ndarray, float], tuple]
    shape: tuple
    period: float
    family: str = ""
    diagnostics: Callable[[np.ndarray, float], Any] | None = None
    tol: float = NEWTON_TOL
    meta: dict = field(default_factory=dict)

    def self_test(self, u: np.ndarray, s: float, rng=None, trials: int = 3, eps: float = 1e-5,
                  amplitude: float = 1e-3) -> float:
        """Compare the Jacobian with centred differences of the residual on random states.

        Returns the worst relative mismatch; raises :class:`JacobianMismatch`
        above ``1e-6``.
        """
        rng = np.random.default_rng(0) if rng is None else rng
        worst = 0.0
        for _ in range(trials):
            state = u + amplitude * _smooth_noise(self.shape, rng)
            if not self.guard(state, s)[0]:
                state = u
            du = _smooth_noise(self.shape, rng).ravel()
            jac = self.linearization(state, s)
            lin = jac @ du
            # keep the probe in the linear regime for stiff stencils
            scale = max(1.0, float(np.max(np.abs(lin))))
            du, lin = du / scale, lin / scale
            fp = self.residual(state + eps * du.reshape(self.shape), s).ravel()
            fm = self.residual(state - eps * du.reshape(self.shape), s).ravel()
            fd = (fp - fm) / (2 * eps)
            err = np.max(np.abs(lin - fd)) / max(1.0, np.max(np.abs(lin)))
            worst = max(worst, err)
        if worst > JACOBIAN_CHECK_TOL:
            raise JacobianMismatch(f"linearization does not match residual (rel. error {worst:.2e})")
        return worst


def _smooth_noise(shape, rng) -> np.ndarray:
    """Random low-frequency field on the grid (smooth enough for stencils)."""
    grids = np.meshgrid(*[np.linspace(0, 1, n, endpoint=(k > 0)) for k, n in enumerate(shape)],
                        indexing="ij")
    out = np.zeros(shape)
    for k in range(1, 4):
        c = rng.normal(size=2 * len(shape))
        term = np.ones(shape)
        for d, g in enumerate(grids):
            term = term * (c[2 * d] * np.cos(2 * np.pi * k * g) + c[2 * d + 1] * np.sin(2 * np.pi * k * g))
        out += term / k**2
    return out


def rounding_floor(jac, u, tol: float) -> float:
    """Smallest residual Newton can certify: ``tol + eps * |J|_inf * |u|_inf``.

    Stiff stencils amplify the rounding error of ``u`` by the operator norm,
    so for large ``1/h^2`` or nearly degenerate metrics the nominal tolerance
    can sit below what double precision resolves.
    """
    return tol + float(np.finfo(float).eps * _op_norm(jac) * np.max(np.abs(u)))


@dataclass
class NewtonResult:
    profile: np.ndarray
    iterations: int
    residual_inf: float
    damping_events: int
    history: list
    at_floor: bool = False


def newton_solve(problem: Problem, start, s: float, tol: float | None = None,
                 max_iter: int = MAX_ITER) -> NewtonResult:
    """Damped Newton iteration for ``problem.residual(u, s) = 0``.

    The step is halved until the iterate stays inside the elliptic cone and
    the Armijo condition on ``||F||_2^2`` holds.
    """
    tol = problem.tol if tol is None else tol
    u = np.array(start, dtype=float).reshape(problem.shape)
    ok, node = problem.guard(u, s)
    if not ok:
        raise LeftEllipticCone(f"start outside the elliptic cone at node {node}")
    f = problem.residual(u, s)
    history = [float(np.max(np.abs(f)))]
    damping = 0
    it = 0
    at_floor = False
    while history[-1] > tol:
        if it >= max_iter:
            raise NoConvergence(f"no convergence after {max_iter} iterations", history)
        jac = problem.linearization(u, s)
        floor = rounding_floor(jac, u, tol)
        du = linear_solve(jac, -f.ravel()).reshape(problem.shape)
        phi0 = float(np.sum(f**2))
        lam = 1.0
        for _ in range(60):
            trial = u + lam * du
            if problem.guard(trial, s)[0]:
                ft = problem.residual(trial, s)
                phi = float(np.sum(ft**2))
                if phi <= (1.0 - 2.0 * ARMIJO * lam) * phi0:
                    break
            lam *= 0.5
            damping += 1
        else:
            raise LeftEllipticCone("left the elliptic cone")
        if lam < 1.0 and np.max(np.abs(ft)) >= history[-1] and phi >= phi0:
            if history[-1] <= floor:
                at_floor = True
                break
            raise NoConvergence("line search stalled", history)
        assert phi <= phi0, "accepted Newton step increased the residual"
        u, f = trial, ft
        history.append(float(np.max(np.abs(f))))
        it += 1
        log.debug("newton s=%.6g it=%d res=%.3e lam=%.3g", s, it, history[-1], lam)
        if history[-1] > tol and history[-1] <= floor and history[-1] > 0.5 * history[-2]:
            at_floor = True
            break
    return NewtonResult(u, it, history[-1], damping, history, at_floor)


@dataclass
class ContinuationRecord:
    s: float
    profile: np.ndarray
    newton_iters: int
    final_residual_inf: float
    damping_events: int
    diagnostics: Any = None
    at_floor: bool = False


class ContinuationFailed(RuntimeError):
    def __init__(self, message: str, records: list):
        super().__init__(message)
        self.records = records


def _predict(records: list, s_new: float):
    if len(records) < 2:
        return records[-1].profile
    r0, r1 = records[-2], records[-1]
    if r1.s == r0.s:
        return r1.profile
    w = (s_new - r1.s) / (r1.s - r0.s)
    return r1.profile + w * (r1.profile - r0.profile)


def continuation_run(problem: Problem, schedule: Sequence[float], start, tol: float | None = None,
                     max_iter: int = MAX_ITER, max_bisections: int = MAX_BISECTIONS,
                     self_test: bool = True) -> list[ContinuationRecord]:
    """Solve along ``schedule`` with warm starts.

    A failed step is retried from the last converged ``s`` with the step
    halved, up to ``max_bisections`` times; every converged intermediate ``s``
    produces a record.  If the schedule cannot be completed
    :class:`ContinuationFailed` is raised carrying the partial records.
    """
    schedule = [float(s) for s in schedule]
    if not schedule:
        return []
    diffs = np.diff(schedule)
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("schedule must be strictly monotone")
    start = np.array(start, dtype=float).reshape(problem.shape)
    if self_test:
        problem.self_test(start, schedule[0])
    records: list[ContinuationRecord] = []

    def attempt(s, guess):
        res = newton_solve(problem, guess, s, tol, max_iter)
        diag = problem.diagnostics(res.profile, s) if problem.diagnostics else None
        return ContinuationRecord(s, res.profile, res.iterations, res.residual_inf,
                                  res.damping_events, diag, res.at_floor)

    try:
        records.append(attempt(schedule[0], start))
    except (NoConvergence, LeftEllipticCone, JacobianSingular) as exc:
        raise ContinuationFailed(f"failed at first s={schedule[0]:.6g}: {exc}", records) from exc

    for target in schedule[1:]:
        s_prev = records[-1].s
        step = target - s_prev
        bisections = 0
        while records[-1].s != target:
            s_try = records[-1].s + step
            if (step > 0 and s_try > target) or (step < 0 and s_try < target):
                s_try = target
            guess = _predict(records, s_try)
            if not problem.guard(guess, s_try)[0]:
                guess = records[-1].profile
            try:
                records.append(attempt(s_try, guess))
            except (NoConvergence, LeftEllipticCone, JacobianSingular) as exc:
                bisections += 1
                if bisections > max_bisections:
                    raise ContinuationFailed(
                        f"gave up before s={target:.6g} (last converged s={records[-1].s:.6g}): {exc}",
                        records,
                    ) from exc
                step *= 0.5
                log.info("bisecting continuation step to %.3g at s=%.6g", step, records[-1].s)
    return records
