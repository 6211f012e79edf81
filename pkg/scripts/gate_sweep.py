#!/usr/bin/env python3
"""Contraction constant against the Lipschitz constant for one (alpha, T).

Lists both gate forms for a range of L, marks where they disagree and gives
the largest admissible L under each.
"""

import argparse

import numpy as np

from nlsubdiff.solver import (
    NumericsConfig,
    ProblemSpec,
    contraction_delta,
    envelope_constant,
    theorem_delta,
)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--T", type=float, default=0.5)
    ap.add_argument("--L-max", type=float, default=5.0)
    ap.add_argument("--steps", type=int, default=11)
    args = ap.parse_args()

    zero = lambda x, t: np.zeros(np.broadcast(x, t).shape)
    C = envelope_constant(ProblemSpec(args.alpha, args.T, zero, zero, 0.0), NumericsConfig())
    print(f"alpha = {args.alpha}, T = {args.T}, C = {C:.6g}")
    print(f"{'L':>8} {'derivation':>11} {'theorem':>9}  note")
    for L in np.linspace(0.0, args.L_max, args.steps):
        d, dt = contraction_delta(L, args.alpha, args.T, C), theorem_delta(L, args.alpha, args.T, C)
        note = "forms disagree" if (d < 1) != (dt < 1) else ("rejected" if d >= 1 else "")
        print(f"{L:8.3f} {d:11.4f} {dt:9.4f}  {note}")
    per_unit = contraction_delta(1.0, args.alpha, args.T, C)
    per_unit_thm = theorem_delta(1.0, args.alpha, args.T, C)
    print(f"largest admissible L: derivation form {1 / per_unit:.4f}, theorem form {1 / per_unit_thm:.4f}")


if __name__ == "__main__":
    main()
