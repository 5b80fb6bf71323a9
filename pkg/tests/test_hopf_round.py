import numpy as np
import pytest

from hermcont import hopf_round as hr
from hermcont.ambient_oracle import MetricField, ScalarField, complex_hessian_fd, ricci_fd
from hermcont.discretize import MetricLostPositivity
from hermcont.solver import continuation_run
from hermcont.tensor_core import HermitianForm, relative_eigenvalues, trace_of, wedge_ratio


def test_params_normalise_modulus():
    p = hr.HopfRoundParams(2, 0.5)
    assert p.modulus == 2.0
    assert p.period == pytest.approx(2 * np.log(2))
    for bad in [(1, 2.0), (2, 1.0), (2, -3.0)]:
        with pytest.raises(ValueError):
            hr.HopfRoundParams(*bad)


def test_profile_invariants():
    with pytest.raises(ValueError):
        hr.RadialProfile(np.zeros(8), 1.0)
    with pytest.raises(ValueError):
        hr.RadialProfile(np.full(16, np.nan), 1.0)
    u = hr.RadialProfile.from_trig(2.0, 64, 0.3, cos=[0.1], sin=[0.0, 0.2])
    t = np.linspace(0, 2, 7)
    exact = 0.3 + 0.1 * np.cos(np.pi * t) + 0.2 * np.sin(2 * np.pi * t)
    assert np.allclose(u(t), exact, atol=1e-12)


def test_hopf_metric_examples():
    assert np.allclose(hr.hopf_metric((1.0, 0.0)).entries, np.eye(2))
    m = 3.0
    assert np.allclose(hr.hopf_metric((m, 0.0)).entries, np.eye(2) / m**2)
    with pytest.raises(ValueError):
        hr.hopf_metric((0.0, 0.0))


def test_hopf_metric_self_trace(rng):
    for n in (2, 3, 4):
        p = hr.random_point(rng, n)
        g = hr.hopf_metric(p)
        assert trace_of(g, g) == pytest.approx(n)


def test_hopf_ricci_closed_form(rng):
    assert np.allclose(hr.hopf_ricci((1.0, 0.0)).entries, np.diag([0.0, 2.0]))
    field = MetricField(2, hr.hopf_metric)
    for _ in range(50):
        p = hr.random_point(rng, 2)
        ric = hr.hopf_ricci(p)
        assert np.max(np.abs(ricci_fd(field, p).entries - ric.entries)) < 1e-6
        # semipositive with the radial direction in the kernel
        assert np.min(ric.eigenvalues()) > -1e-12
        assert np.max(np.abs(ric.entries @ np.conj(p))) < 1e-12


def test_omega_hat_examples():
    p = (1.0, 0.0)
    assert np.allclose(hr.omega_hat(0.0, p).entries, hr.hopf_metric(p).entries)
    assert np.allclose(hr.omega_hat(0.25, p).entries, np.diag([1.0, 0.5]))
    for s in (-0.1, 0.5, 0.7):
        with pytest.raises(hr.OutsideExistenceInterval, match="outside existence interval"):
            hr.omega_hat(s, p)


def test_determinant_identity(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 5))
        s = rng.uniform(0, 1.0 / n)
        p = hr.random_point(rng, n)
        ratio = wedge_ratio(hr.omega_hat(s, p), hr.hopf_metric(p))
        assert abs(ratio - (1 - n * s) ** (n - 1)) < 1e-12


def test_ricci_invariance(rng):
    for _ in range(10):
        s = rng.uniform(0, 0.45)
        p = hr.random_point(rng, 2)
        hat = ricci_fd(MetricField(2, lambda q: hr.omega_hat(s, q)), p)
        ref = ricci_fd(MetricField(2, hr.hopf_metric), p)
        assert np.max(np.abs(hat.entries - ref.entries)) < 1e-5


def test_residual_explicit_solution(round_params):
    z = hr.RadialProfile.zeros(round_params.period, 64)
    for s in (0.01, 0.3, 0.49):
        assert np.all(hr.reduced_residual(z, z, s, 2) == 0.0)


def test_residual_constant_shift(round_params):
    z = hr.RadialProfile.zeros(round_params.period, 64)
    c = hr.RadialProfile(np.full(64, 0.7), round_params.period)
    assert np.allclose(hr.reduced_residual(c, z, 0.2, 2), -0.7 / 0.2)


def test_residual_guard(round_params):
    z = hr.RadialProfile.zeros(round_params.period, 64)
    bad = hr.RadialProfile.from_trig(round_params.period, 64, cos=[-5.0])
    with pytest.raises(MetricLostPositivity, match="metric lost positivity") as info:
        hr.reduced_residual(bad, z, 0.1, 2)
    assert info.value.node is not None


@pytest.mark.parametrize("n", [2, 3])
def test_reduction_matches_ambient_oracle(rng, round_params, n):
    period, N = round_params.period, 1024
    u = hr.RadialProfile.from_trig(period, N, 0.01, cos=[0.02], sin=[0.01, 0.005])
    u0 = hr.RadialProfile.from_trig(period, N, sin=[0.03])
    s = 0.6 / n
    res = hr.reduced_residual(u, u0, s, n)
    phi, phi0 = u.lift(), u0.lift()
    for i in rng.choice(N, size=20, replace=False):
        d = rng.normal(size=n) + 1j * rng.normal(size=n)
        p = d / np.linalg.norm(d) * np.exp(u.nodes[i] / 2)
        hat = hr.omega_hat(s, p)
        omega = hat + complex_hessian_fd(ScalarField(n, phi), p)
        lhs = np.log(wedge_ratio(omega, hat)) - (phi(p) - phi0(p)) / s
        assert lhs == pytest.approx(res[i], abs=1e-5)


def test_linearization_rows_at_zero(round_params):
    s = 0.05
    jac = hr.reduced_linearization(np.zeros(64), s, 2, round_params.period).todense()
    assert np.allclose(jac.sum(axis=1), -1.0 / s)
    # strictly diagonally dominant for small s
    off = np.sum(np.abs(jac), axis=1) - np.abs(np.diag(jac))
    assert np.all(np.abs(np.diag(jac)) > off)


def test_linearization_directional_derivative(rng, round_params):
    N, period, n = 128, round_params.period, 2
    t = np.arange(N) * period / N
    u0 = 0.05 * np.sin(2 * np.pi * t / period)
    for _ in range(5):
        u = 0.02 * np.cos(2 * np.pi * t / period + rng.uniform(0, 6))
        du = np.sin(2 * np.pi * t / period * rng.integers(1, 4) + rng.uniform(0, 6))
        s, eps = rng.uniform(0.05, 0.45), 1e-5
        lin = hr.reduced_linearization(u, s, n, period) @ du
        fd = (hr.reduced_residual(u + eps * du, u0, s, n, period)
              - hr.reduced_residual(u - eps * du, u0, s, n, period)) / (2 * eps)
        assert np.max(np.abs(lin - fd)) <= 1e-6 * max(1.0, np.max(np.abs(lin)))


def test_diagnostics_explicit_family(round_params):
    z = hr.RadialProfile.zeros(round_params.period, 64)
    for s in (0.1, 0.25, 0.4):
        row = hr.diagnostics(z, z, s, 2)
        assert row.R_min == pytest.approx(2 / (1 - 2 * s), rel=1e-12)
        assert row.R_max == pytest.approx(2 / (1 - 2 * s), rel=1e-12)
        assert row.normalization_defect == pytest.approx(0.0, abs=1e-12)
    row = hr.diagnostics(z, z, 0.25, 2)
    assert row.vol_ratio_min == row.vol_ratio_max == pytest.approx(1.0)
    assert row.trace_max == pytest.approx(1.5)


def test_diagnostics_match_pointwise_algebra(round_params):
    period, N, n, s = round_params.period, 256, 2, 0.3
    u = hr.RadialProfile.from_trig(period, N, cos=[0.03])
    u0 = hr.RadialProfile.from_trig(period, N, sin=[0.05])
    row = hr.diagnostics(u, u0, s, n)
    h = period / N
    du = (np.roll(u.values, -1) - np.roll(u.values, 1)) / (2 * h)
    d2u = (np.roll(u.values, -1) - 2 * u.values + np.roll(u.values, 1)) / h**2
    du0 = (np.roll(u0.values, -1) - np.roll(u0.values, 1)) / (2 * h)
    d2u0 = (np.roll(u0.values, -1) - 2 * u0.values + np.roll(u0.values, 1)) / h**2
    # in a unitary frame adapted to z at r = 1, every form is diagonal
    curv = []
    for i in range(N):
        omega = HermitianForm.diag([1 - n * s + du[i], 1 + d2u[i]])
        omega0 = HermitianForm.diag([1 + du0[i], 1 + d2u0[i]])
        curv.append((trace_of(omega0, omega) - n) / s)
        lam = relative_eigenvalues(omega, HermitianForm.diag([1 - n * s, 1.0]))
        assert row.vol_ratio_min <= np.prod(lam) + 1e-12
    assert row.R_min == pytest.approx(min(curv), rel=1e-12)
    assert row.R_max == pytest.approx(max(curv), rel=1e-12)


def test_initial_data_admissibility():
    # 0.1 sin(2 pi t / T) is admissible for T = 2 pi but not for m = 2
    ok = hr.HopfRoundParams(2, np.exp(np.pi))
    hr.check_initial_data(hr.RadialProfile.from_trig(ok.period, 256, sin=[0.1]), 2)
    small = hr.HopfRoundParams(2, 2.0)
    with pytest.raises(MetricLostPositivity, match="initial metric not positive"):
        hr.check_initial_data(hr.RadialProfile.from_trig(small.period, 256, sin=[0.1]), 2)


def test_schedule(round_params):
    sched = hr.schedule(round_params, 1e-3, 1e-5)
    assert len(sched) == 17
    assert sched[0] == pytest.approx(1e-3)
    assert 0.5 - sched[-1] == pytest.approx(1e-5, rel=1e-9)
    assert 0.5 - sched[-2] == pytest.approx(0.499 * 2.0**-15, rel=1e-6)
    with pytest.raises(hr.OutsideExistenceInterval):
        hr.schedule(round_params, 0.0)


@pytest.fixture(scope="module")
def perturbed_run(round_params):
    u0 = hr.RadialProfile.from_trig(round_params.period, 256, sin=[0.1])
    return u0, continuation_run(hr.problem(round_params, u0), hr.schedule(round_params), u0.values)


def test_solved_profiles_obey_c0_bound(perturbed_run):
    u0, records = perturbed_run
    bound = np.max(np.abs(u0.values))
    for rec in records:
        assert rec.diagnostics.phi_inf <= bound + 1e-12


def test_solved_profiles_obey_trace_bound(perturbed_run, round_params):
    u0, records = perturbed_run
    h = round_params.period / u0.grid_size
    v = u0.values
    tr0 = np.max((1 + (np.roll(v, -1) - np.roll(v, 1)) / (2 * h))
                 + (1 + (np.roll(v, -1) - 2 * v + np.roll(v, 1)) / h**2))
    for rec in records:
        assert rec.diagnostics.trace_max <= max(2.0, tr0) + 1e-9


def test_solved_profiles_volume_ratio_bounded(perturbed_run):
    u0, records = perturbed_run
    lo = np.exp(-2 * np.max(np.abs(u0.values)) / records[0].s)
    for rec in records:
        assert lo <= rec.diagnostics.vol_ratio_min <= rec.diagnostics.vol_ratio_max <= 1 / lo
