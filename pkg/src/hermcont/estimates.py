"""Bound monitors, power-law fits and per-theorem verdicts.

The constants in a-priori estimates are existential, so finitely many
continuation steps can only reveal blow-up.  A quantity counts as *bounded*
when its sup over the second half of the schedule exceeds the sup over the
first half by less than 5%; the observed sup is reported as the empirical
constant.  Rate clauses are checked with a least-squares fit in log-log
coordinates against the admissible interval widened by 0.1 on each side.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

TAIL_FACTOR = 1.05
TAIL_ATOL = 1e-6
ROUNDING_FLOOR = 1e-9
WINDOW_SLACK = 0.1
MIN_FIT_POINTS = 5

BASE_COLUMNS = (
    "s", "phi_inf", "vol_ratio_min", "vol_ratio_max", "trace_max",
    "R_min", "R_max", "newton_iters", "residual_inf",
)
INOUE_COLUMNS = (
    "trace_hat_max", "trace_inv_hat_max", "ricci_rel_min", "ricci_rel_max",
    "gh_fiber_diam", "gh_base_length",
)
HOPF_FAMILIES = ("hopf_round", "hopf_class1")


class CsvFormatError(ValueError):
    pass


class FamilyMismatch(ValueError):
    pass


@dataclass(frozen=True)
class DiagnosticsRow:
    """Monitored quantities at one continuation step.

    ``trace_max`` is the trace with respect to the family's reference metric
    (Hopf, Gauduchon-Ornea or Tricerri).  Fields that do not apply to a
    family stay ``nan``.
    """

    s: float
    phi_inf: float = math.nan
    vol_ratio_min: float = math.nan
    vol_ratio_max: float = math.nan
    trace_max: float = math.nan
    trace_hat_max: float = math.nan
    trace_inv_hat_max: float = math.nan
    R_min: float = math.nan
    R_max: float = math.nan
    ricci_rel_min: float = math.nan
    ricci_rel_max: float = math.nan
    normalization_defect: float = math.nan
    gh_fiber_diam: float = math.nan
    gh_base_length: float = math.nan
    eig_dev_max: float = math.nan
    newton_iters: int = 0
    residual_inf: float = math.nan

    def __post_init__(self):
        if self.vol_ratio_min > self.vol_ratio_max:
            raise ValueError("vol_ratio_min exceeds vol_ratio_max")
        if self.R_min > self.R_max:
            raise ValueError("R_min exceeds R_max")


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    r2: float
    slope_ci: tuple[float, float]
    n_points: int


@dataclass(frozen=True)
class ClauseVerdict:
    clause: str
    statement: str
    passed: bool
    observed: float
    detail: str = ""


@dataclass
class EstimateReport:
    theorem: int
    family: str
    rows: list[DiagnosticsRow]
    verdicts: list[ClauseVerdict]
    fits: dict[str, ExponentFit] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def verdict(self, clause: str) -> ClauseVerdict:
        for v in self.verdicts:
            if v.clause == clause:
                return v
        raise KeyError(clause)

    def format(self) -> str:
        lines = [f"Theorem {self.theorem} ({self.family}), {len(self.rows)} records"]
        for v in self.verdicts:
            flag = "PASS" if v.passed else "FAIL"
            lines.append(f"  clause ({v.clause}) {flag}: {v.statement}; observed {v.observed:.6g}"
                         + (f"; {v.detail}" if v.detail else ""))
        for name, fit in self.fits.items():
            lines.append(
                f"  fit {name}: slope {fit.slope:.4f} "
                f"[{fit.slope_ci[0]:.4f}, {fit.slope_ci[1]:.4f}] r2={fit.r2:.6f} n={fit.n_points}"
            )
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


def fit_exponent(pairs: Iterable[tuple[float, float]]) -> ExponentFit:
    """Least-squares line through ``(log x, log y)``."""
    arr = np.asarray(list(pairs), dtype=float)
    if arr.ndim != 2 or arr.shape[0] < MIN_FIT_POINTS:
        raise ValueError(f"need at least {MIN_FIT_POINTS} pairs")
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("exponent fit needs positive data")
    lx, ly = np.log(arr[:, 0]), np.log(arr[:, 1])
    res = stats.linregress(lx, ly)
    n = arr.shape[0]
    tq = stats.t.ppf(0.975, n - 2)
    half = tq * res.stderr
    r2 = res.rvalue**2 if np.isfinite(res.rvalue) else 1.0
    return ExponentFit(float(res.slope), float(res.intercept), float(r2),
                       (float(res.slope - half), float(res.slope + half)), n)


def tail_bounded(values: Sequence[float]) -> tuple[bool, float, str]:
    """5%-tail criterion; returns ``(passed, overall sup, detail)``."""
    v = np.asarray(values, dtype=float)
    if v.size == 0 or np.any(~np.isfinite(v)):
        return False, math.nan, "non-finite or missing values"
    k = v.size // 2
    first, last = v[: max(k, 1)], v[k:]
    sup_first, sup_last = float(np.max(first)), float(np.max(last))
    ok = sup_last <= TAIL_FACTOR * sup_first + TAIL_ATOL
    return ok, float(np.max(v)), f"tail sup {sup_last:.6g} vs head sup {sup_first:.6g}"


def _tail(rows: list, minimum: int = MIN_FIT_POINTS) -> list:
    k = len(rows) // 2
    tail = rows[k:]
    return tail if len(tail) >= minimum else rows[-minimum:]


def _window_verdict(clause, statement, xs, ys, lo, hi, fits, name) -> ClauseVerdict:
    try:
        fit = fit_exponent(zip(xs, ys))
    except ValueError as exc:
        return ClauseVerdict(clause, statement, False, math.nan, f"fit failed: {exc}")
    fits[name] = fit
    ok = (lo - WINDOW_SLACK) <= fit.slope <= (hi + WINDOW_SLACK)
    return ClauseVerdict(clause, statement, ok, fit.slope,
                         f"window [{lo - WINDOW_SLACK:.3g}, {hi + WINDOW_SLACK:.3g}]")


def rows_from_records(records) -> list[DiagnosticsRow]:
    rows = []
    for rec in records:
        if isinstance(rec, DiagnosticsRow):
            rows.append(rec)
            continue
        rows.append(dataclasses.replace(rec.diagnostics, newton_iters=int(rec.newton_iters),
                                        residual_inf=float(rec.final_residual_inf)))
    return rows


def _vol_spread(r: DiagnosticsRow) -> float:
    return max(r.vol_ratio_max, 1.0 / r.vol_ratio_min)


def build_report(theorem: int, records, family: str, n: int = 2,
                 base_length_limit: float | None = None) -> EstimateReport:
    """Evaluate every clause of Theorem 1, 2 or 3 on a monotone run.

    ``family`` must match the theorem (1: hopf_round, 2: hopf_class1,
    3: inoue).  ``n`` is the complex dimension for Theorem 1.  For Theorem 3
    ``base_length_limit`` (the circle length ``P / sqrt 2``) enables the
    absolute check on the base length; without it only its convergence is
    checked.
    """
    expected = {1: "hopf_round", 2: "hopf_class1", 3: "inoue"}
    if theorem not in expected:
        raise ValueError("theorem must be 1, 2 or 3")
    if family != expected[theorem]:
        raise FamilyMismatch(f"theorem {theorem} needs {expected[theorem]} records, got {family}")
    rows = rows_from_records(records)
    if not rows:
        raise ValueError("no records")
    ss = np.array([r.s for r in rows])
    if len(ss) > 1 and not np.all(np.diff(ss) > 0):
        raise ValueError("records must be increasing in s")
    if theorem == 3:
        return _theorem3(rows, base_length_limit)
    return _hopf_theorem(theorem, rows, n if theorem == 1 else 2)


def _hopf_theorem(theorem: int, rows: list[DiagnosticsRow], n: int) -> EstimateReport:
    fits: dict[str, ExponentFit] = {}
    verdicts = []
    ref = "omega_H" if theorem == 1 else "omega_GO"
    ok, sup, det = tail_bounded([r.phi_inf for r in rows])
    verdicts.append(ClauseVerdict("1", "|phi| <= C", ok, sup, det))
    ok, sup, det = tail_bounded([_vol_spread(r) for r in rows])
    verdicts.append(ClauseVerdict("2", "C^-1 <= omega^n / hat^n <= C", ok, sup, det))
    ok, sup, det = tail_bounded([r.trace_max for r in rows])
    verdicts.append(ClauseVerdict("3", f"omega <= C {ref}", ok, sup, det))
    tail = _tail(rows)
    xs = [1.0 - n * r.s for r in tail]
    if theorem == 1:
        lo, hi = -(n - 1.0), -(1.0 - 1.0 / n)
    else:
        lo, hi = -1.0, -0.5
    verdicts.append(_window_verdict("4", "R(omega) rate in (1 - ns)", xs, [r.R_max for r in tail],
                                    lo, hi, fits, "R_max"))
    if all(r.R_min > 0 for r in tail):
        try:
            fits["R_min"] = fit_exponent(zip(xs, [r.R_min for r in tail]))
        except ValueError:
            pass
    family = "hopf_round" if theorem == 1 else "hopf_class1"
    return EstimateReport(theorem, family, rows, verdicts, fits)


def theorem3_monitors(row: DiagnosticsRow) -> dict[str, float]:
    """Normalised quantities that stay bounded under the Inoue estimates."""
    s = row.s
    log_vol = max(abs(math.log(row.vol_ratio_min)), abs(math.log(row.vol_ratio_max)))
    dev = max(row.trace_hat_max - 2.0, row.trace_inv_hat_max - 2.0, 0.0)
    return {
        "phi_scaled": (s + 1) * row.phi_inf,
        "log_vol_scaled": s * log_vol,
        "trace_dev_scaled": (s + 1) ** 0.25 * dev,
        "ricci_abs": max(abs(row.ricci_rel_min), abs(row.ricci_rel_max)),
        "trace_dev": dev,
    }


def _theorem3(rows: list[DiagnosticsRow], base_length_limit: float | None) -> EstimateReport:
    fits: dict[str, ExponentFit] = {}
    notes: list[str] = []
    verdicts = []
    big = [r for r in rows if r.s >= 1.0] or rows
    mons = [theorem3_monitors(r) for r in big]
    ok, sup, det = tail_bounded([m["phi_scaled"] for m in mons])
    verdicts.append(ClauseVerdict("1", "|phi| <= C/(s+1)", ok, sup, det))
    ok, sup, det = tail_bounded([m["log_vol_scaled"] for m in mons])
    verdicts.append(ClauseVerdict("2", "|log omega^2/hat^2| <= C/s", ok, sup, det))

    ok_b, sup, det = tail_bounded([m["trace_dev_scaled"] for m in mons])
    tail = _tail(big)
    devs = [theorem3_monitors(r)["trace_dev"] for r in tail]
    if max(devs) <= ROUNDING_FLOOR:
        verdicts.append(ClauseVerdict("3", "trace deviation decays in (s+1)", ok_b, 0.0,
                                      "trace deviation at rounding level"))
    else:
        try:
            fit = fit_exponent(zip([r.s + 1 for r in tail], devs))
            fits["trace_dev"] = fit
            hi = -0.125 + WINDOW_SLACK
            ok = ok_b and fit.slope <= hi
            quarter = "consistent" if fit.slope <= -0.25 else "not consistent"
            notes.append(f"trace-decay exponent {fit.slope:.4f} is {quarter} with the (s+1)^(-1/4) rate")
            verdicts.append(ClauseVerdict("3", "trace deviation decays in (s+1)", ok, fit.slope,
                                          f"slope <= {hi:.3g}; {det}"))
        except ValueError as exc:
            verdicts.append(ClauseVerdict("3", "trace deviation decays in (s+1)", False, math.nan,
                                          f"fit failed: {exc}"))
    ok, sup, det = tail_bounded([m["ricci_abs"] for m in mons])
    verdicts.append(ClauseVerdict("4", "-C omega <= Ric(omega) <= C omega", ok, sup, det))

    gh_ok = True
    gh_detail = []
    diam = [r.gh_fiber_diam for r in tail]
    try:
        fit = fit_exponent(zip([r.s + 1 for r in tail], diam))
        fits["gh_fiber_diam"] = fit
        gh_ok &= fit.slope <= -0.5 + WINDOW_SLACK
        gh_detail.append(f"fiber slope {fit.slope:.4f}")
    except ValueError as exc:
        gh_ok = False
        gh_detail.append(f"fiber fit failed: {exc}")
    all_diam = np.array([r.gh_fiber_diam for r in big])
    if len(all_diam) > 1 and not np.all(np.diff(all_diam) < 0):
        gh_ok = False
        gh_detail.append("fiber bound not decreasing")
    last = rows[-1].gh_base_length
    if base_length_limit is not None:
        rel = abs(last - base_length_limit) / base_length_limit
        gh_ok &= rel <= 0.01
        gh_detail.append(f"base length off limit by {rel:.2e}")
    else:
        base = [r.gh_base_length for r in tail]
        rel = (max(base) - min(base)) / last
        gh_ok &= rel <= 0.01
        gh_detail.append(f"base length tail variation {rel:.2e}")
    verdicts.append(ClauseVerdict("GH", "collapse to a circle", bool(gh_ok), last, "; ".join(gh_detail)))
    return EstimateReport(3, "inoue", rows, verdicts, fits, notes)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def emit_csv(report_or_rows, path, inoue: bool | None = None) -> None:
    """Write the monitor table in the fixed column layout."""
    if isinstance(report_or_rows, EstimateReport):
        rows = report_or_rows.rows
        inoue = report_or_rows.family == "inoue" if inoue is None else inoue
    else:
        rows = rows_from_records(report_or_rows)
        inoue = bool(inoue)
    cols = BASE_COLUMNS + (INOUE_COLUMNS if inoue else ())
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(_fmt(getattr(r, c)) for c in cols))
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_csv(path) -> tuple[list[DiagnosticsRow], bool]:
    """Parse a file written by :func:`emit_csv`; returns ``(rows, is_inoue)``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CsvFormatError(f"cannot read {path}: {exc}") from exc
    reader = list(csv.reader(text.splitlines()))
    if not reader:
        raise CsvFormatError(f"{path}: empty file")
    header = tuple(reader[0])
    if header == BASE_COLUMNS:
        inoue = False
    elif header == BASE_COLUMNS + INOUE_COLUMNS:
        inoue = True
    else:
        raise CsvFormatError(f"{path}: unexpected header")
    if not text.endswith("\n"):
        raise CsvFormatError(f"{path}: truncated (no final newline)")
    rows = []
    for lineno, rec in enumerate(reader[1:], start=2):
        if len(rec) != len(header):
            raise CsvFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
        try:
            vals = {k: float(v) for k, v in zip(header, rec)}
            vals["newton_iters"] = int(rec[header.index("newton_iters")])
            rows.append(DiagnosticsRow(**vals))
        except ValueError as exc:
            raise CsvFormatError(f"{path}:{lineno}: {exc}") from exc
    return rows, inoue
