"""Command line entry point.

    nlsubdiff solve  CONFIG [--set key=value ...]
    nlsubdiff verify CONFIG [--set key=value ...]
    nlsubdiff sweep  CONFIG --param L --from A --to B --steps N

Exit status: 0 success, 1 input or I/O error, 2 contraction gate
rejected, 3 no convergence (or a failed accuracy self-check).
Diagnostics go to stderr; data goes to the configured files (sweep
writes its table to stdout).
"""

from __future__ import annotations

import argparse
import contextlib
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .errors import AccuracyError, DomainError, GateRejected, NonConvergence
from .oracle import nonlocal_oracle_solve
from .solver import (
    ContractionReport,
    SolutionBundle,
    contraction_delta,
    envelope_constant,
    fixed_point_solve,
    solve,
    theorem_delta,
)

EXIT_OK, EXIT_INPUT, EXIT_GATE, EXIT_NONCONV = 0, 1, 2, 3


def _err(*lines: str) -> None:
    for line in lines:
        print(line, file=sys.stderr)


def _thread_limit():
    n = os.environ.get("NLSUBDIFF_THREADS")
    if not n:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return contextlib.nullcontext()
    return threadpool_limits(int(n))


def gate_report(cfg: RunConfig, C: float) -> ContractionReport:
    p = cfg.problem
    L = p.lipschitz()
    return ContractionReport(
        delta=contraction_delta(L, p.alpha, p.T, C),
        delta_theorem=theorem_delta(L, p.alpha, p.T, C),
        C_used=C, L=L, alpha=p.alpha, T=p.T,
    )


# {{{ outputs


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def write_field(path: Path, bundle: SolutionBundle) -> None:
    u = bundle.u
    with open(path, "w", newline="\n") as fh:
        fh.write("x,t,u\n")
        for n, tn in enumerate(u.t):
            for i, xi in enumerate(u.x):
                fh.write(f"{_fmt(xi)},{_fmt(tn)},{_fmt(u.values[n, i])}\n")


def read_field(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of write_field: returns x, t and values[t, x]."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = np.unique(data[:, 1])
    x = data[: data.shape[0] // t.size, 0]
    return x, t, data[:, 2].reshape(t.size, x.size)


def write_trace(path: Path, bundle: SolutionBundle) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("x,v\n")
        for xi, vi in zip(bundle.v.nodes, bundle.v.values):
            fh.write(f"{_fmt(xi)},{_fmt(vi)}\n")


def report_lines(cfg: RunConfig, bundle: SolutionBundle) -> list[str]:
    r, res = bundle.report, bundle.residuals
    lines = [
        f"problem = {cfg.problem.to_spec().label}",
        f"alpha = {r.alpha!r}",
        f"T = {r.T!r}",
        f"L = {r.L!r}",
        f"C_used = {r.C_used!r}",
        f"delta = {r.delta!r}",
        f"delta_theorem = {r.delta_theorem!r}",
        "gate = derivation",
        f"iterations = {r.iterations}",
        f"converged = {str(r.converged).lower()}",
        f"a_posteriori = {r.a_posteriori!r}",
        f"tail_ratio = {r.tail_ratio!r}",
        f"residual_pde = {res.pde!r}",
        f"residual_pde_tmin = {res.t_min!r}",
        f"residual_boundary = {res.boundary!r}",
        f"residual_nonlocal = {res.nonlocal_!r}",
        f"t0_method = {bundle.u.meta.get('t0_method')}",
        f"flagged_rows = {len(bundle.u.meta.get('flagged_rows', []))}",
        f"nx = {cfg.numerics.nx}",
        f"nt = {cfg.numerics.nt}",
        f"wall_time = {bundle.wall_time:.3f}",
    ]
    lines += [f"increment_{k} = {inc!r}" for k, inc in enumerate(r.increments, start=1)]
    return lines


def emit_outputs(bundle: SolutionBundle, cfg: RunConfig) -> list[Path]:
    written = []
    out = cfg.output
    if out.field is not None:
        write_field(out.field, bundle)
        written.append(out.field)
    if out.trace is not None:
        write_trace(out.trace, bundle)
        written.append(out.trace)
    if out.report is not None:
        out.report.write_text("\n".join(report_lines(cfg, bundle)) + "\n")
        written.append(out.report)
    return written


# }}}


def _solve(cfg: RunConfig) -> SolutionBundle:
    spec = cfg.problem.to_spec()
    C = envelope_constant(spec, cfg.numerics)
    rep = gate_report(cfg, C)
    if rep.delta >= 1.0 and not cfg.numerics.attempt_anyway:
        _err(*rep.lines()[:5])
        raise GateRejected(
            rep.delta,
            f"rejected: delta = {rep.delta:.6g} >= 1 (threshold 1; "
            f"largest admissible L = {spec.L / rep.delta if rep.delta > 0 else float('inf'):.6g})",
        )
    bundle = solve(spec, _with_C(cfg, C).numerics)
    _err(*bundle.report.lines())
    return bundle


def _with_C(cfg: RunConfig, C: float) -> RunConfig:
    return replace(cfg, numerics=replace(cfg.numerics, C=C))


def cmd_solve(cfg: RunConfig) -> int:
    bundle = _solve(cfg)
    res = bundle.residuals
    _err(
        f"residuals: pde = {res.pde:.3e} (t >= {res.t_min:g}), boundary = {res.boundary:.3e}, "
        f"nonlocal = {res.nonlocal_:.3e}",
        f"wall time {bundle.wall_time:.2f} s",
    )
    for path in emit_outputs(bundle, cfg):
        _err(f"wrote {path}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    bundle = _solve(cfg)
    spec = cfg.problem.to_spec()
    nt = cfg.numerics.nt * cfg.oracle.nt_factor
    v_or, rep = nonlocal_oracle_solve(
        spec, cfg.numerics.nx, nt, tol=cfg.numerics.tol, max_iter=cfg.numerics.max_iter,
        delta=bundle.report.delta, method=cfg.oracle.method,
    )
    diff = float(np.max(np.abs(v_or.values - bundle.v.values)))
    _err(
        f"oracle ({cfg.oracle.method}, nx = {cfg.numerics.nx}, nt = {nt}): "
        f"{rep.iterations} iterations",
        f"max |v - v_oracle| = {diff:.3e}",
    )
    emit_outputs(bundle, cfg)
    return EXIT_OK


def _sweep_key(cfg: RunConfig, param: str) -> str:
    if param == "L":
        return "problem.lambda" if cfg.problem.g_family else "problem.L"
    return param if "." in param else f"problem.{param}"


def cmd_sweep(cfg: RunConfig, param: str, lo: float, hi: float, steps: int) -> int:
    if steps < 1:
        raise ConfigError("--steps must be at least 1")
    key = _sweep_key(cfg, param)
    C = envelope_constant(cfg.problem.to_spec(), cfg.numerics)
    print(f"{param},delta,delta_theorem,forms_agree,status,iterations,tail_ratio")
    values = np.linspace(lo, hi, steps) if steps > 1 else np.array([lo])
    for val in map(float, values):
        try:
            sub = _with_C(cfg.with_value(key, repr(val)), C)
            spec = sub.problem.to_spec()
            rep = gate_report(sub, C)
            status, iters, ratio = EXIT_OK, "", ""
            try:
                _, done = fixed_point_solve(spec, sub.numerics, C=C)
                iters, ratio = str(done.iterations), f"{done.tail_ratio:.6g}"
            except GateRejected:
                status = EXIT_GATE
            except NonConvergence as exc:
                status = EXIT_NONCONV
                iters = str(exc.report.iterations) if exc.report is not None else ""
        except DomainError as exc:
            _err(f"{param} = {val:.6g}: {exc}")
            print(f"{val!r},,,,{EXIT_INPUT},,")
            continue
        agree = (rep.delta < 1) == (rep.delta_theorem < 1)
        _err(f"{param} = {val:.6g}: delta = {rep.delta:.6g} (theorem form {rep.delta_theorem:.6g})"
             + (" -> rejected" if status == EXIT_GATE else "")
             + ("" if agree else "; gate forms disagree, derivation form applied"))
        print(f"{val!r},{rep.delta!r},{rep.delta_theorem!r},{str(agree).lower()},{status},{iters},{ratio}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlsubdiff", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("solve", "verify", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("config")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key")
        if name == "sweep":
            p.add_argument("--param", required=True)
            p.add_argument("--from", dest="lo", type=float, required=True)
            p.add_argument("--to", dest="hi", type=float, required=True)
            p.add_argument("--steps", type=int, required=True)
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            cfg = cfg.with_value(k.strip(), v.strip())
        with _thread_limit():
            if args.command == "solve":
                return cmd_solve(cfg)
            if args.command == "verify":
                return cmd_verify(cfg)
            return cmd_sweep(cfg, args.param, args.lo, args.hi, args.steps)
    except GateRejected as exc:
        _err(str(exc))
        return EXIT_GATE
    except NonConvergence as exc:
        if exc.report is not None and hasattr(exc.report, "lines"):
            _err(*exc.report.lines())
        _err(str(exc))
        return EXIT_NONCONV
    except AccuracyError as exc:
        _err(f"accuracy check failed: {exc}")
        return EXIT_NONCONV
    except (DomainError, OSError) as exc:
        _err(f"error: {exc}")
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
