"""Scenario configuration files.

Grammar: UTF-8 text, one ``key = value`` per line, ``#`` starts a comment
(whole-line or trailing), blank lines ignored, keys are case-insensitive and
may not repeat.  Lists are comma separated; the Inoue matrix is three rows
separated by ``;``.  Example::

    family = hopf_round
    n = 2
    modulus = 23.140692632779267   # e^pi, so T = 2 pi
    u0_sin = 0.1
    s_end_offset = 1e-5
    out = round.csv

Keys
----
family          hopf_round | hopf_class1 | inoue (required)
n, modulus      round Hopf dimension and |alpha_j|          (2, 2.0)
mod_a, mod_b    class-1 moduli |alpha| <= |beta|            (2.0, 4.0)
matrix          Inoue matrix rows                           (0 1 0; 0 0 1; 1 1 0)
u0_const        constant term of the initial potential      (0)
u0_cos, u0_sin  Fourier amplitudes of modes 1, 2, ... in the periodic variable
u0_a_poly       class-1 only: coefficients of a, a^2, ...
grid            nodes of the 1D grid                        (256)
grid_l, grid_a  class-1 grid                                (128, 65)
s_start         first continuation parameter                (1e-3 Hopf, 1 Inoue)
s_end_offset    Hopf: stop at s_limit - s_end_offset        (1e-5 round, 1e-4 class 1)
s_max, ratio    Inoue geometric schedule                    (1e4, 1.5)
tol, max_iter   Newton tolerance and iteration cap          (family default, 50)
seed            RNG seed for identity sampling              (0)
out             CSV output path                             (<family>.csv)
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from . import hopf_class1 as c1
from . import hopf_round as hr
from . import inoue
from .solver import NEWTON_TOL, MAX_ITER

FAMILIES = ("hopf_round", "hopf_class1", "inoue")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    return tuple(float(x) for x in text.split(",") if x.strip()) if text else ()


def _matrix(text: str) -> tuple[tuple[int, ...], ...]:
    rows = [r.split() for r in text.split(";") if r.strip()]
    try:
        vals = [[float(x) for x in r] for r in rows]
    except ValueError as exc:
        raise ConfigError(f"bad matrix: {text!r}") from exc
    if len(vals) != 3 or any(len(r) != 3 for r in vals):
        raise ConfigError("matrix must have three rows of three integers")
    if any(v != int(v) for r in vals for v in r):
        raise ConfigError("matrix entries must be integers")
    return tuple(tuple(int(v) for v in r) for r in vals)


@dataclass
class ScenarioConfig:
    family: str
    n: int = 2
    modulus: float = 2.0
    mod_a: float = 2.0
    mod_b: float = 4.0
    matrix: tuple = inoue.DEFAULT_MATRIX
    u0_const: float = 0.0
    u0_cos: tuple = ()
    u0_sin: tuple = ()
    u0_a_poly: tuple = ()
    grid: int = 256
    grid_l: int = 128
    grid_a: int = 65
    s_start: float | None = None
    s_end_offset: float | None = None
    s_max: float = 1e4
    ratio: float = 1.5
    tol: float | None = None
    max_iter: int = MAX_ITER
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        hopf = self.family != "inoue"
        if self.s_start is None:
            self.s_start = 1e-3 if hopf else 1.0
        if self.s_end_offset is None:
            self.s_end_offset = 1e-5 if self.family == "hopf_round" else 1e-4
        if self.tol is None:
            self.tol = c1.NEWTON_TOL if self.family == "hopf_class1" else NEWTON_TOL
        if self.out is None:
            self.out = f"{self.family}.csv"
        if not self.s_start > 0:
            raise ConfigError("s_start must be positive (the equation degenerates at s = 0)")
        if not self.tol > 0 or self.max_iter < 1:
            raise ConfigError("tol must be positive and max_iter at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.u0_a_poly and self.family != "hopf_class1":
            raise ConfigError("u0_a_poly only applies to hopf_class1")

    # -- family objects

    def params(self):
        try:
            if self.family == "hopf_round":
                return hr.HopfRoundParams(self.n, self.modulus)
            if self.family == "hopf_class1":
                return c1.HopfClass1Params(self.mod_a, self.mod_b)
            return inoue.validate_matrix(self.matrix)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def initial_profile(self, params=None):
        params = self.params() if params is None else params
        try:
            if self.family == "hopf_round":
                return hr.RadialProfile.from_trig(params.period, self.grid, self.u0_const,
                                                  self.u0_cos, self.u0_sin)
            if self.family == "hopf_class1":
                return c1.InvariantProfile2D.from_series(params.period, self.grid_l, self.grid_a,
                                                         self.u0_const, self.u0_cos, self.u0_sin,
                                                         self.u0_a_poly)
            return inoue.LeafProfile.from_trig(params.period, self.grid, self.u0_const,
                                               self.u0_cos, self.u0_sin)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def schedule(self, params=None) -> list[float]:
        params = self.params() if params is None else params
        try:
            if self.family == "hopf_round":
                return hr.schedule(params, self.s_start, self.s_end_offset)
            if self.family == "hopf_class1":
                return c1.schedule(self.s_start, self.s_end_offset)
            return inoue.schedule(self.s_start, self.s_max, self.ratio)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def resolved(self) -> list[tuple[str, str]]:
        """Every key with its effective value, for the report header."""
        keys = ["family"]
        if self.family == "hopf_round":
            keys += ["n", "modulus", "grid", "s_start", "s_end_offset"]
        elif self.family == "hopf_class1":
            keys += ["mod_a", "mod_b", "grid_l", "grid_a", "u0_a_poly", "s_start", "s_end_offset"]
        else:
            keys += ["matrix", "grid", "s_start", "s_max", "ratio"]
        keys += ["u0_const", "u0_cos", "u0_sin", "tol", "max_iter", "seed", "out"]
        out = []
        for k in keys:
            v = getattr(self, k)
            if k == "matrix":
                v = "; ".join(" ".join(str(x) for x in row) for row in v)
            elif isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            out.append((k, str(v)))
        return out


_CONVERTERS = {
    "family": str.strip,
    "n": int,
    "modulus": float,
    "mod_a": float,
    "mod_b": float,
    "matrix": _matrix,
    "u0_const": float,
    "u0_cos": _floats,
    "u0_sin": _floats,
    "u0_a_poly": _floats,
    "grid": int,
    "grid_l": int,
    "grid_a": int,
    "s_start": float,
    "s_end_offset": float,
    "s_max": float,
    "ratio": float,
    "tol": float,
    "max_iter": int,
    "seed": int,
    "out": str.strip,
}


def parse_config(text: str) -> ScenarioConfig:
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",),
        interpolation=None, strict=True,
    )
    try:
        parser.read_string("[scenario]\n" + text)
    except configparser.DuplicateOptionError as exc:
        # the synthetic section header shifts line numbers by one
        raise ConfigError(f"duplicate key {exc.option!r} at line {exc.lineno - 1}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    raw = dict(parser["scenario"])
    unknown = sorted(set(raw) - set(_CONVERTERS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "family" not in raw:
        raise ConfigError("config must set family")
    kwargs = {}
    for key, value in raw.items():
        try:
            kwargs[key] = _CONVERTERS[key](value)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return ScenarioConfig(**kwargs)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def initial_check(cfg: ScenarioConfig, params, u0):
    """Raise ``MetricLostPositivity`` if ``omega_0`` is not positive on the grid."""
    if cfg.family == "hopf_round":
        hr.check_initial_data(u0, params.n)
    elif cfg.family == "inoue":
        inoue.check_initial_data(u0)
    # class 1 needs the grid geometry; the caller checks it after building it
