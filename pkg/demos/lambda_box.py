"""Compare F_lambda with F on a box of centers around the counterexample minimum.

Prints max |F_lambda - F| over an n x n x n box of side 0.2 about 2 e3
(default n = 5, i.e. 125 Lyapunov-Schmidt solves per lambda).

    python3 demos/lambda_box.py [n] [lambda ...]
"""
from __future__ import annotations

import itertools
import sys

import numpy as np

from outlying_cmc.cmc import LyapunovSchmidtSolver, MetricSpec
from outlying_cmc.counterexample import BumpParams, counterexample_grid, counterexample_tensor
from outlying_cmc.functional import FunctionalContext, eval_F

A_K200 = -0.08039745841893713


def main(n=5, lams=(1e3,)):
    T = counterexample_tensor(BumpParams(200, 2.0, 64.0, a_k=A_K200))
    ctx = FunctionalContext(T, counterexample_grid(200, azimuthal_count=512))
    side = np.linspace(-0.1, 0.1, n)
    box = [np.array([a, b, 2.0 + c]) for a, b, c in itertools.product(side, side, side)]
    F = np.array([eval_F(ctx, xi) for xi in box])
    for lam in lams:
        solver = LyapunovSchmidtSolver(MetricSpec(T), lam)
        Fl = np.array([solver.solve(xi)[1].f_lambda for xi in box])
        d = Fl - F
        print(f"lambda={lam:g}: max|F_lambda - F| = {np.abs(d).max():.3e}, "
              f"spread of the difference = {d.max() - d.min():.3e}")


if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 5
    lams = tuple(float(v) for v in sys.argv[2:]) or (1e3,)
    main(n, lams)
