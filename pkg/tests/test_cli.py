import subprocess
import sys

import pytest

from hermcont import inoue
from hermcont.cli import main
from hermcont.config import ConfigError, ScenarioConfig, parse_config
from hermcont.estimates import read_csv


def _write(tmp_path, text, name="scenario.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def _solve(tmp_path, text, name="run"):
    cfg = _write(tmp_path, text + f"\nout = {tmp_path / (name + '.csv')}\n", name + ".cfg")
    return main(["solve", "--config", str(cfg)]), tmp_path / (name + ".csv")


def test_verify_identities_round(capsys):
    assert main(["verify-identities", "--family", "hopf_round", "--samples", "100"]) == 0
    out = capsys.readouterr().out
    assert "all identities hold" in out and "FAIL" not in out


def test_verify_identities_inoue_config(tmp_path, capsys):
    cfg = _write(tmp_path, "family = inoue\nmatrix = 0 1 0; 0 0 1; 1 1 0\n")
    assert main(["verify-identities", "--config", str(cfg), "--samples", "50", "--seed", "7"]) == 0
    assert "seed 7" in capsys.readouterr().out


def test_verify_identities_bad_matrix(tmp_path, capsys):
    cfg = _write(tmp_path, "family = inoue\nmatrix = 0 1 0; 0 0 1; 2 1 0\n")
    assert main(["verify-identities", "--config", str(cfg), "--samples", "5"]) == 2
    assert "not in SL₃(ℤ)" in capsys.readouterr().err


def test_verify_identities_needs_family(capsys):
    assert main(["verify-identities"]) == 2
    assert main(["verify-identities", "--family", "inoue", "--samples", "0"]) == 2


def test_solve_round_explicit(tmp_path, capsys):
    code, csv = _solve(tmp_path, "family = hopf_round\nn = 2\nmodulus = 2.0\ngrid = 128")
    assert code == 0
    rows, is_inoue = read_csv(csv)
    assert not is_inoue and rows[-1].s == pytest.approx(0.5 - 1e-5)
    for r in rows:
        assert r.R_max == pytest.approx(2 / (1 - 2 * r.s), rel=1e-8)
        assert r.residual_inf <= 1e-11
    report = csv.with_suffix(".report.txt").read_text()
    assert "Theorem 1 (hopf_round)" in report
    assert report in capsys.readouterr().out


def test_solve_inoue_constants(tmp_path):
    code, csv = _solve(tmp_path, "family = inoue\ns_max = 1e4")
    assert code == 0
    rows, is_inoue = read_csv(csv)
    assert is_inoue and rows[-1].s == 1e4
    scaled = [(r.s + 1) * r.phi_inf for r in rows]
    assert all(b >= a for a, b in zip(scaled, scaled[1:]))
    assert scaled[-1] == pytest.approx(4.0, rel=0.01)
    for r in rows:
        assert r.phi_inf == pytest.approx(inoue.constant_solution(r.s), rel=1e-10)


def test_solve_rejects_s_start_zero(tmp_path, capsys):
    code, csv = _solve(tmp_path, "family = hopf_round\ns_start = 0")
    assert code == 2 and not csv.exists()
    assert "s = 0" in capsys.readouterr().err


def test_solve_rejects_inadmissible_initial_data(tmp_path, capsys):
    code, csv = _solve(tmp_path, "family = inoue\nu0_sin = 0.1")
    assert code == 2 and not csv.exists()
    assert "initial metric not positive" in capsys.readouterr().err
    code, _ = _solve(tmp_path, "family = hopf_round\nmodulus = 2\nu0_sin = 0.5", "round")
    assert code == 2


def test_solve_partial_run(tmp_path, capsys):
    # one Newton iteration cannot absorb the steps near s = 1/2
    code, csv = _solve(tmp_path, "family = hopf_round\nmodulus = 23.140692632779267\n"
                                 "u0_sin = 0.1\ngrid = 64\nmax_iter = 1")
    assert code == 3
    assert csv.exists()
    assert "continuation stopped early" in capsys.readouterr().out


def test_config_echo(tmp_path):
    code, csv = _solve(tmp_path, "family = hopf_round\ngrid = 64\ns_end_offset = 1e-3")
    assert code == 0
    header = [l for l in csv.with_suffix(".report.txt").read_text().splitlines() if l.startswith("#")]
    keys = [l[2:].split(" = ")[0] for l in header]
    assert keys[0] == "family"
    for k in ("n", "modulus", "grid", "s_start", "s_end_offset", "tol", "max_iter", "seed", "out"):
        assert k in keys
    assert "# s_start = 0.001" in header


def test_csv_byte_determinism(tmp_path):
    text = "family = hopf_round\nmodulus = 23.140692632779267\nu0_sin = 0.1\ngrid = 64\ns_end_offset = 1e-3"
    _, a = _solve(tmp_path, text, "a")
    _, b = _solve(tmp_path, text, "b")
    assert a.read_bytes() == b.read_bytes()


def test_report_explicit_and_errors(tmp_path, capsys):
    code, csv = _solve(tmp_path, "family = hopf_round\ngrid = 128")
    assert code == 0
    assert main(["report", str(csv), "--theorem", "1"]) == 0
    assert main(["report", str(csv), "--theorem", "3"]) == 2
    truncated = tmp_path / "trunc.csv"
    truncated.write_bytes(csv.read_bytes()[:-7])
    assert main(["report", str(truncated), "--theorem", "1"]) == 2
    capsys.readouterr()


def test_report_planted_blowup(tmp_path, capsys):
    code, csv = _solve(tmp_path, "family = hopf_round\ngrid = 128")
    lines = csv.read_text().splitlines()
    out = [lines[0]]
    for line in lines[1:]:
        f = line.split(",")
        f[1] = format(1.0 / (1 - 2 * float(f[0])), ".12g")
        out.append(",".join(f))
    planted = tmp_path / "planted.csv"
    planted.write_text("\n".join(out) + "\n")
    capsys.readouterr()
    assert main(["report", str(planted), "--theorem", "1"]) == 1
    assert "clause (1) FAIL" in capsys.readouterr().out


def test_report_with_config(tmp_path):
    code, csv = _solve(tmp_path, "family = inoue")
    cfg = _write(tmp_path, "family = inoue\n", "plain.cfg")
    assert main(["report", str(csv), "--theorem", "3", "--config", str(cfg)]) == 0
    assert main(["report", str(csv), "--theorem", "1", "--config", str(cfg)]) == 2


def test_parse_config_grammar():
    cfg = parse_config("# comment\nFamily = hopf_round   # trailing\n\nu0_cos = 0.1, 0.02\n")
    assert cfg.family == "hopf_round" and cfg.u0_cos == (0.1, 0.02)
    assert parse_config("family = inoue\nmatrix = 0 1 0 ; 0 0 1 ; 1 1 0").matrix == inoue.DEFAULT_MATRIX
    for text, msg in [
        ("family = inoue\nbogus = 1", "unknown config keys"),
        ("family = inoue\nseed = 1\nseed = 2", "duplicate key .seed. at line 3"),
        ("n = 2", "must set family"),
        ("family = klein", "unknown family"),
        ("family = inoue\ngrid = ten", "bad value for grid"),
        ("family = inoue\nmatrix = 1 0; 0 1", "three rows"),
        ("family = inoue\nseed = -1", "64-bit"),
        ("family = hopf_round\nu0_a_poly = 0.1", "only applies"),
    ]:
        with pytest.raises(ConfigError, match=msg):
            parse_config(text)


def test_config_defaults():
    assert ScenarioConfig("inoue").s_start == 1.0
    assert ScenarioConfig("hopf_class1").s_end_offset == 1e-4
    assert ScenarioConfig("hopf_round").schedule()[-1] == pytest.approx(0.5 - 1e-5, abs=1e-6)


def test_unknown_key_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, "family = inoue\nbogus = 1\n")
    assert main(["solve", "--config", str(cfg)]) == 2
    assert main(["solve", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "hermcont", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "verify-identities" in out.stdout
