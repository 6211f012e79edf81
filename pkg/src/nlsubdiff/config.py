"""Run configuration: a flat ``section.key = value`` text format.

Example::

    # comments start with '#'
    problem.alpha = 0.5
    problem.T = 1
    problem.f = sin(pi*x)
    problem.g = 0.3*sin(w)
    problem.L = 0.3
    numerics.nx = 64
    output.field = field.csv

Instead of ``problem.g`` a built-in family can be named with
``problem.g_family = linear | bounded`` together with ``problem.psi`` (an
expression in x) and ``problem.lambda``; then g = psi + lambda*w or
g = psi + lambda*sin(w), and L = |lambda| is filled in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import DomainError
from .expr import compile_expr
from .solver import NumericsConfig, ProblemSpec


class ConfigError(DomainError):
    pass


@dataclass(frozen=True)
class ProblemConfig:
    alpha: float
    T: float
    f: str = "0"
    g: str | None = None
    L: float | None = None
    g_family: str | None = None
    psi: str = "0"
    lam: float = 0.0

    def lipschitz(self) -> float:
        if self.g_family is not None:
            return abs(self.lam)
        return 0.0 if self.L is None else self.L

    def g_source(self) -> str:
        if self.g_family == "linear":
            return f"({self.psi}) + ({self.lam!r})*w"
        if self.g_family == "bounded":
            return f"({self.psi}) + ({self.lam!r})*sin(w)"
        return self.g if self.g is not None else "0"

    def to_spec(self) -> ProblemSpec:
        f = compile_expr(self.f, ("x", "t"))
        g = compile_expr(self.g_source(), ("x", "w"))
        return ProblemSpec(self.alpha, self.T, f, g, self.lipschitz(),
                           label=f"f = {self.f}; g = {self.g_source()}")


@dataclass(frozen=True)
class OutputConfig:
    field: Path | None = None
    trace: Path | None = None
    report: Path | None = None


@dataclass(frozen=True)
class OracleConfig:
    nt_factor: int = 4
    method: str = "fd"


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemConfig
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)

    def with_value(self, dotted: str, value: str) -> "RunConfig":
        """Copy with one key overridden, as if it were in the file."""
        section, key = _split(dotted, 0)
        raw = {section: {key: value}}
        return _build(raw, base=self)


# {{{ key tables: name -> (attribute, converter, range check)


def _num(lo=-math.inf, hi=math.inf, lo_open=False, hi_open=False):
    def conv(s: str) -> float:
        v = float(s)
        if not math.isfinite(v):
            raise ValueError("must be finite")
        if v < lo or v > hi or (lo_open and v == lo) or (hi_open and v == hi):
            lb = "(" if lo_open else "["
            rb = ")" if hi_open else "]"
            raise ValueError(f"must lie in {lb}{lo}, {hi}{rb}")
        return v

    return conv


def _int(lo: int, hi: int):
    def conv(s: str) -> int:
        v = int(s)
        if not lo <= v <= hi:
            raise ValueError(f"must lie in [{lo}, {hi}]")
        return v

    return conv


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


def _choice(*opts):
    def conv(s: str) -> str:
        if s not in opts:
            raise ValueError(f"must be one of {', '.join(opts)}")
        return s

    return conv


KEYS = {
    "problem": {
        "alpha": ("alpha", _num(0, 1, True, True)),
        "T": ("T", _num(0, math.inf, True)),
        "f": ("f", str),
        "g": ("g", str),
        "L": ("L", _num(0)),
        "g_family": ("g_family", _choice("linear", "bounded")),
        "psi": ("psi", str),
        "lambda": ("lam", _num()),
    },
    "numerics": {
        "nx": ("nx", _int(2, 4096)),
        "nt": ("nt", _int(1, 100000)),
        "quad_order": ("quad_order", _int(4, 512)),
        "panels": ("panels", _int(4, 60)),
        "panel_order": ("panel_order", _int(2, 64)),
        "image_cutoff": ("image_cutoff", _int(1, 400)),
        "tol": ("tol", _num(0, 1, True)),
        "max_iter": ("max_iter", _int(1, 100000)),
        "safety": ("safety", _num(1)),
        "envelope_decades": ("envelope_decades", _num(2, 12)),
        "C": ("C", _num(0, math.inf, True)),
        "attempt_anyway": ("attempt_anyway", _bool),
    },
    "output": {"field": ("field", Path), "trace": ("trace", Path), "report": ("report", Path)},
    "oracle": {"nt_factor": ("nt_factor", _int(1, 64)), "method": ("method", _choice("fd", "spectral"))},
}

# }}}


def _split(key: str, lineno: int) -> tuple[str, str]:
    parts = key.split(".")
    where = f" (line {lineno})" if lineno else ""
    if len(parts) != 2 or parts[0] not in KEYS:
        raise ConfigError(f"unknown key {key!r}{where}")
    if parts[1] not in KEYS[parts[0]]:
        raise ConfigError(f"unknown key {key!r}{where}")
    return parts[0], parts[1]


def parse_text(text: str) -> dict[str, dict[str, str]]:
    raw: dict[str, dict[str, str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in body.split("=", 1))
        section, name = _split(key, lineno)
        if name in raw.get(section, {}):
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        raw.setdefault(section, {})[name] = value
    return raw


def _convert(section: str, values: dict[str, str]) -> dict:
    out = {}
    for name, value in values.items():
        attr, conv = KEYS[section][name]
        try:
            out[attr] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"{section}.{name} = {value!r}: {exc}") from None
    return out


def _build(raw: dict[str, dict[str, str]], base: RunConfig | None = None,
           root: Path | None = None) -> RunConfig:
    vals = {s: _convert(s, raw.get(s, {})) for s in KEYS}
    if root is not None:
        vals["output"] = {k: (v if v.is_absolute() else root / v) for k, v in vals["output"].items()}
    if base is None:
        missing = [k for k in ("alpha", "T") if k not in vals["problem"]]
        if missing:
            raise ConfigError("missing required key(s): " + ", ".join(f"problem.{m}" for m in missing))
        problem = ProblemConfig(**vals["problem"])
        numerics = NumericsConfig(**vals["numerics"])
        output = OutputConfig(**vals["output"])
        oracle = OracleConfig(**vals["oracle"])
    else:
        problem = replace(base.problem, **vals["problem"])
        numerics = replace(base.numerics, **vals["numerics"])
        output = replace(base.output, **vals["output"])
        oracle = replace(base.oracle, **vals["oracle"])
    if problem.g_family is not None and problem.g is not None:
        raise ConfigError("give either problem.g or problem.g_family, not both")
    if problem.g_family is not None and problem.L is not None:
        raise ConfigError("problem.L is derived from problem.lambda for built-in families")
    if problem.g is not None and problem.L is None and problem.g.strip() != "0":
        raise ConfigError("problem.L is required with an expression g")
    cfg = RunConfig(problem, numerics, output, oracle)
    cfg.problem.to_spec()  # surfaces expression errors at load time
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return _build(parse_text(text), root=path.parent)


def load_text(text: str, root: Path | None = None) -> RunConfig:
    return _build(parse_text(text), root=root)


def describe(cfg: RunConfig) -> list[str]:
    lines = []
    for sec_name in ("problem", "numerics", "output", "oracle"):
        sec = getattr(cfg, sec_name)
        for f_ in fields(sec):
            lines.append(f"{sec_name}.{f_.name} = {getattr(sec, f_.name)}")
    return lines


def sample_max(fn, T: float, n: int = 33) -> float:
    x = np.linspace(0.0, 1.0, n)
    X, Tm = np.meshgrid(x, np.linspace(0.0, T, n))
    return float(np.max(np.abs(fn(X, Tm))))
