#!/usr/bin/env python3
"""Grid refinement on the manufactured problem u = (1 + t^2) sin(pi x).

Prints the max-norm errors of the final-time trace v and of the full field
together with the observed orders between successive grids.
"""

import argparse
import math
import time

import numpy as np

from nlsubdiff.solver import NumericsConfig, ProblemSpec, envelope_constant, solve


def manufactured(alpha: float, T: float, lam: float):
    c = math.gamma(3.0) / math.gamma(3.0 - alpha)

    def exact(x, t):
        return (1.0 + np.asarray(t) ** 2) * np.sin(np.pi * np.asarray(x))

    def f(x, t):
        t = np.asarray(t, float)
        return (c * t ** (2.0 - alpha) + np.pi**2 * (1.0 + t**2)) * np.sin(np.pi * x)

    def g(x, w):
        return exact(x, 0.0) + lam * (w - exact(x, T))

    return ProblemSpec(alpha, T, f, g, abs(lam), label="manufactured"), exact


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--lam", type=float, default=0.5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64, 128])
    args = ap.parse_args()

    spec, exact = manufactured(args.alpha, args.T, args.lam)
    C = envelope_constant(spec, NumericsConfig())
    print(f"alpha = {args.alpha}, T = {args.T}, lambda = {args.lam}, C = {C:.6g}")
    print(f"{'n':>5} {'err_v':>10} {'order':>6} {'err_u':>10} {'order':>6} {'iters':>5} {'time':>7}")
    prev = None
    for n in args.sizes:
        t0 = time.time()
        b = solve(spec, NumericsConfig(nx=n, nt=n, C=C))
        x = b.v.nodes
        ev = float(np.max(np.abs(b.v.values - exact(x, args.T))))
        eu = float(np.max(np.abs(b.u.values - exact(x[None, :], b.u.t[:, None]))))
        pv = pu = ""
        if prev is not None:
            r = prev[0] / n
            pv = f"{math.log(prev[1] / ev) / math.log(1 / r):.2f}"
            pu = f"{math.log(prev[2] / eu) / math.log(1 / r):.2f}"
        print(f"{n:5d} {ev:10.3e} {pv:>6} {eu:10.3e} {pu:>6} {b.report.iterations:5d} "
              f"{time.time() - t0:6.1f}s")
        prev = (n, ev, eu)
    print(f"delta = {b.report.delta:.4f}, expected order >= {min(2 - args.alpha, 2) - 0.3:.2f}")


if __name__ == "__main__":
    main()
