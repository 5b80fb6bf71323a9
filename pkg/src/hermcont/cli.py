"""Command-line front end.

Exit codes: 0 success, 1 identity or verdict failure, 2 configuration or
input error, 3 continuation stopped before the end of the schedule.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import hopf_class1 as c1
from . import hopf_round as hr
from . import inoue
from .config import FAMILIES, ConfigError, ScenarioConfig, initial_check, load_config
from .discretize import MetricLostPositivity
from .estimates import CsvFormatError, build_report, emit_csv, read_csv
from .identities import run_suite
from .solver import ContinuationFailed, JacobianMismatch, continuation_run

log = logging.getLogger("hermcont")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2, 3
THEOREM_OF = {"hopf_round": 1, "hopf_class1": 2, "inoue": 3}


def _error(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_CONFIG


def _scenario(args) -> ScenarioConfig:
    if args.config:
        cfg = load_config(args.config)
        if getattr(args, "family", None) and args.family != cfg.family:
            raise ConfigError(f"--family {args.family} disagrees with config family {cfg.family}")
    elif getattr(args, "family", None):
        cfg = ScenarioConfig(family=args.family)
    else:
        raise ConfigError("need --config or --family")
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        ScenarioConfig.__post_init__(cfg)
    return cfg


def cmd_verify_identities(args) -> int:
    try:
        cfg = _scenario(args)
        params = cfg.params()
    except ConfigError as exc:
        return _error(str(exc))
    if args.samples < 1:
        return _error("--samples must be at least 1")
    t0 = time.perf_counter()
    results = run_suite(cfg.family, params, seed=cfg.seed, samples=args.samples)
    print(f"# identities for {cfg.family}, seed {cfg.seed}, {args.samples} samples each")
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print(f"# {'all identities hold' if ok else 'identity failure'} ({time.perf_counter() - t0:.2f} s)")
    return EXIT_OK if ok else EXIT_FAIL


def _build_problem(cfg: ScenarioConfig, params, u0):
    if cfg.family == "hopf_round":
        return hr.problem(params, u0)
    if cfg.family == "hopf_class1":
        geo = c1.Class1Grid(params, cfg.grid_l, cfg.grid_a)
        c1.check_initial_data(geo, u0)
        return c1.problem(params, u0, geo)
    return inoue.problem(params, u0)


def _report_kwargs(cfg: ScenarioConfig, params) -> dict:
    if cfg.family == "hopf_round":
        return {"n": params.n}
    if cfg.family == "inoue":
        return {"base_length_limit": params.base_length_limit}
    return {}


def cmd_solve(args) -> int:
    try:
        cfg = _scenario(args)
        if args.out:
            cfg.out = args.out
        params = cfg.params()
        u0 = cfg.initial_profile(params)
        sched = cfg.schedule(params)
        initial_check(cfg, params, u0)
        prob = _build_problem(cfg, params, u0)
    except ConfigError as exc:
        return _error(str(exc))
    except MetricLostPositivity as exc:
        return _error(str(exc))
    out = Path(cfg.out)
    report_path = out.with_suffix(".report.txt")
    log.info("solving %s over %d parameter values", cfg.family, len(sched))
    status = EXIT_OK
    failure = ""
    try:
        records = continuation_run(prob, sched, u0.values, tol=cfg.tol, max_iter=cfg.max_iter)
    except ContinuationFailed as exc:
        records, status, failure = exc.records, EXIT_PARTIAL, str(exc)
    except JacobianMismatch as exc:
        return _error(str(exc))
    try:
        emit_csv(records, out, inoue=cfg.family == "inoue")
    except OSError as exc:
        return _error(str(exc))

    header = [f"# {k} = {v}" for k, v in cfg.resolved()]
    body = []
    if failure:
        body.append(f"continuation stopped early: {failure}")
    if records:
        floor = sum(r.at_floor for r in records)
        if floor:
            body.append(f"{floor} step(s) stopped at the rounding floor above tol {cfg.tol:g}")
    if len(records) >= 2:
        try:
            rep = build_report(THEOREM_OF[cfg.family], records, cfg.family, **_report_kwargs(cfg, params))
            body.append(rep.format())
        except ValueError as exc:
            body.append(f"report unavailable: {exc}")
    else:
        body.append("too few records for a report")
    text = "\n".join(header + body) + "\n"
    report_path.write_text(text, encoding="utf-8")
    print(text, end="")
    print(f"# wrote {out} ({len(records)} rows) and {report_path}")
    return status


def cmd_report(args) -> int:
    kwargs = {}
    if args.config:
        try:
            cfg = load_config(args.config)
            params = cfg.params()
        except ConfigError as exc:
            return _error(str(exc))
        if THEOREM_OF[cfg.family] != args.theorem:
            return _error(f"config family {cfg.family} does not belong to theorem {args.theorem}")
        kwargs = _report_kwargs(cfg, params)
    family = {v: k for k, v in THEOREM_OF.items()}[args.theorem]
    all_ok = True
    for path in args.csv:
        try:
            rows, is_inoue = read_csv(path)
        except CsvFormatError as exc:
            return _error(str(exc))
        if is_inoue != (args.theorem == 3):
            return _error(f"{path}: column layout does not match theorem {args.theorem}")
        try:
            rep = build_report(args.theorem, rows, family, **kwargs)
        except ValueError as exc:
            return _error(f"{path}: {exc}")
        print(f"# {path}")
        print(rep.format())
        all_ok &= rep.passed
    return EXIT_OK if all_ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hermcont",
        description="Continuity-equation laboratory for Hopf and Inoue surfaces.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-identities", help="check closed forms against the FD oracle")
    p.add_argument("--config", type=Path, help="scenario file (family parameters)")
    p.add_argument("--family", choices=FAMILIES, help="use default parameters of a family")
    p.add_argument("--seed", type=int, default=None, help="64-bit sampling seed")
    p.add_argument("--samples", type=int, default=100, help="random points per identity")
    p.set_defaults(func=cmd_verify_identities)

    p = sub.add_parser("solve", help="run the continuation and write CSV plus report")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, help="CSV path (overrides the config)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("report", help="rebuild verdicts from CSV files")
    p.add_argument("csv", nargs="+", type=Path)
    p.add_argument("--theorem", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--config", type=Path, help="scenario file supplying n or the Inoue matrix")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
