import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hermcont import hopf_class1 as c1
from hermcont import hopf_round as hr
from hermcont import inoue
from hermcont.estimates import (
    BASE_COLUMNS,
    INOUE_COLUMNS,
    CsvFormatError,
    DiagnosticsRow,
    FamilyMismatch,
    build_report,
    emit_csv,
    fit_exponent,
    read_csv,
    tail_bounded,
)
from hermcont.solver import continuation_run

HEADER = "s,phi_inf,vol_ratio_min,vol_ratio_max,trace_max,R_min,R_max,newton_iters,residual_inf"


@pytest.fixture(scope="module")
def round_records():
    params = hr.HopfRoundParams(2, 2.0)
    prob = hr.problem(params, hr.RadialProfile.zeros(params.period, 128))
    return continuation_run(prob, hr.schedule(params), np.zeros(128))


@pytest.fixture(scope="module")
def inoue_constant_rows(inoue_params):
    P = inoue_params.period
    z = inoue.LeafProfile.zeros(P)
    rows = []
    for s in inoue.schedule():
        u = inoue.LeafProfile(np.full(256, inoue.constant_solution(s)), P)
        rows.append(inoue.theorem3_row(inoue_params, u, z, s))
    return rows


def test_fit_exact_power():
    xs = np.geomspace(1e-3, 1, 9)
    fit = fit_exponent(zip(xs, 1 / xs))
    assert fit.slope == pytest.approx(-1.0, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit.n_points == 9
    assert fit.slope_ci[0] <= fit.slope <= fit.slope_ci[1]


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-5, 5), st.integers(5, 40))
def test_fit_recovers_planted_slope(slope, logc, npts):
    xs = np.geomspace(1e-4, 10, npts)
    ys = np.exp(logc) * xs**slope
    fit = fit_exponent(zip(xs, ys))
    assert fit.slope == pytest.approx(slope, abs=1e-12)
    assert fit.intercept == pytest.approx(logc, abs=1e-10)


def test_fit_errors():
    with pytest.raises(ValueError, match="at least 5"):
        fit_exponent([(1, 1), (2, 2)])
    with pytest.raises(ValueError, match="positive"):
        fit_exponent([(1, 1), (2, 2), (3, -1), (4, 4), (5, 5)])
    with pytest.raises(ValueError, match="positive"):
        fit_exponent([(0, 1), (2, 2), (3, 3), (4, 4), (5, 5)])


def test_fit_round_explicit_family(round_records):
    tail = round_records[-8:]
    fit = fit_exponent((1 - 2 * r.s, r.diagnostics.R_max) for r in tail)
    assert fit.slope == pytest.approx(-1.0, abs=1e-3)


def test_fit_inoue_constants():
    ss = np.geomspace(10, 1e4, 12)
    fit = fit_exponent((s + 1, inoue.constant_solution(s)) for s in ss)
    assert fit.slope == pytest.approx(-1.0, abs=0.02)


def test_tail_bounded():
    assert tail_bounded([1, 2, 3, 3, 3, 3])[0]
    assert tail_bounded([1.0] * 6)[0]
    assert tail_bounded([3, 2, 1, 1])[0]
    ok, sup, _ = tail_bounded([1, 1, 1, 2, 4, 8])
    assert not ok and sup == 8
    assert not tail_bounded([1, math.nan])[0]
    assert not tail_bounded([])[0]
    # tiny absolute wobble at rounding level does not count as blow-up
    assert tail_bounded([1e-13, 1e-13, 3e-13, 5e-13])[0]


def test_row_invariants():
    with pytest.raises(ValueError):
        DiagnosticsRow(0.1, vol_ratio_min=2.0, vol_ratio_max=1.0)
    with pytest.raises(ValueError):
        DiagnosticsRow(0.1, R_min=3.0, R_max=1.0)


def test_theorem1_explicit_family(round_records):
    rep = build_report(1, round_records, "hopf_round", n=2)
    assert [v.clause for v in rep.verdicts] == ["1", "2", "3", "4"]
    assert rep.passed
    assert rep.verdict("4").observed == pytest.approx(-1.0, abs=1e-3)
    assert "clause (4) PASS" in rep.format()


def test_theorem3_constant_solutions(inoue_constant_rows, inoue_params):
    rep = build_report(3, inoue_constant_rows, "inoue", base_length_limit=inoue_params.base_length_limit)
    assert [v.clause for v in rep.verdicts] == ["1", "2", "3", "4", "GH"]
    assert rep.passed, rep.format()
    assert rep.verdict("2").observed < 1e-9
    assert rep.verdict("3").observed == 0.0
    assert rep.verdict("1").observed <= 4.0


def test_theorem2_all_clauses_evaluated(class1_params):
    geo = c1.Class1Grid(class1_params, 32, 33)
    u0 = c1.InvariantProfile2D.zeros(class1_params.period, 32, 33)
    prob = c1.problem(class1_params, u0, geo)
    recs = continuation_run(prob, c1.schedule(end_offset=1e-2), u0.values)
    rep = build_report(2, recs, "hopf_class1")
    assert [v.clause for v in rep.verdicts] == ["1", "2", "3", "4"]
    assert all(np.isfinite(v.observed) for v in rep.verdicts)


def test_family_mismatch(round_records):
    with pytest.raises(FamilyMismatch):
        build_report(2, round_records, "hopf_round")
    with pytest.raises(FamilyMismatch):
        build_report(3, round_records, "hopf_round")
    with pytest.raises(ValueError, match="no records"):
        build_report(1, [], "hopf_round")
    with pytest.raises(ValueError, match="increasing"):
        build_report(1, round_records[::-1], "hopf_round")


def test_planted_blowup_fails(round_records):
    rows = [dataclasses.replace(r.diagnostics, phi_inf=1.0 / (1 - 2 * r.s)) for r in round_records]
    rep = build_report(1, rows, "hopf_round")
    assert not rep.verdict("1").passed
    assert rep.verdict("2").passed


def test_report_deterministic(round_records):
    a = build_report(1, round_records, "hopf_round").format()
    b = build_report(1, round_records, "hopf_round").format()
    assert a == b


def test_csv_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit_csv([], path)
    assert path.read_bytes() == (HEADER + "\n").encode()
    assert read_csv(path) == ([], False)


def test_csv_two_records_deterministic(tmp_path, round_records):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(round_records[:2], a)
    emit_csv(round_records[:2], b)
    lines = a.read_text().split("\n")
    assert len(lines) == 4 and lines[-1] == ""
    assert lines[0] == HEADER
    assert a.read_bytes() == b.read_bytes()
    assert b"\r" not in a.read_bytes()


def test_csv_inoue_columns(tmp_path, inoue_constant_rows):
    path = tmp_path / "inoue.csv"
    rep = build_report(3, inoue_constant_rows, "inoue")
    emit_csv(rep, path)
    lines = path.read_text().splitlines()
    assert lines[0] == HEADER + "," + ",".join(INOUE_COLUMNS)
    assert all(len(line.split(",")) == 15 for line in lines)
    rows, is_inoue = read_csv(path)
    assert is_inoue and len(rows) == len(inoue_constant_rows)


def test_csv_twelve_digits(tmp_path):
    path = tmp_path / "x.csv"
    emit_csv([DiagnosticsRow(0.1, phi_inf=1 / 3, newton_iters=4)], path)
    row = path.read_text().splitlines()[1].split(",")
    assert row[0] == "0.1" and row[1] == "0.333333333333" and row[7] == "4"


_finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False).filter(lambda x: abs(x) > 1e-30 or x == 0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(_finite, _finite, st.floats(0.1, 10), st.floats(0, 5), st.integers(0, 50)),
                min_size=1, max_size=5))
def test_csv_round_trip(tmp_path_factory, data):
    rows = [DiagnosticsRow(k + 0.5, phi_inf=a, trace_max=b, vol_ratio_min=c, vol_ratio_max=c + d,
                           R_min=a, R_max=a + d, newton_iters=it, residual_inf=abs(b))
            for k, (a, b, c, d, it) in enumerate(data)]
    path = tmp_path_factory.mktemp("rt") / "rt.csv"
    emit_csv(rows, path)
    back, is_inoue = read_csv(path)
    assert not is_inoue
    for r, q in zip(rows, back):
        for col in BASE_COLUMNS:
            x, y = getattr(r, col), getattr(q, col)
            assert y == pytest.approx(x, rel=1e-11, abs=0)


def test_csv_read_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(CsvFormatError, match="header"):
        read_csv(bad)
    bad.write_text(HEADER + "\n0.1,1,1,1,1,1,1,2")
    with pytest.raises(CsvFormatError, match="truncated"):
        read_csv(bad)
    bad.write_text(HEADER + "\n0.1,1,1\n")
    with pytest.raises(CsvFormatError, match="expected 9 fields"):
        read_csv(bad)
    bad.write_text(HEADER + "\n0.1,x,1,1,1,1,1,2,0\n")
    with pytest.raises(CsvFormatError):
        read_csv(bad)
    bad.write_text("")
    with pytest.raises(CsvFormatError, match="empty"):
        read_csv(bad)
    with pytest.raises(CsvFormatError, match="cannot read"):
        read_csv(tmp_path / "missing.csv")


def test_csv_unwritable(tmp_path):
    with pytest.raises(OSError, match="missing"):
        emit_csv([], tmp_path / "missing" / "x.csv")
