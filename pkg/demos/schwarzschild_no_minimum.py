"""Why nothing interesting happens without negative density.

Tabulates F and its radial derivative for Schwarzschild and for a tensor
with positive density, next to the lower bound Phi.
"""
from __future__ import annotations

import numpy as np

from outlying_cmc.functional import (
    FunctionalContext,
    phi_lower_bound,
    radial_derivative_F,
    eval_F,
)
from outlying_cmc.tensors import IsotropicTensor, ZeroTensor


def main():
    for name, T in (("schwarzschild", ZeroTensor()), ("isotropic c=-0.1", IsotropicTensor(-0.1))):
        ctx = FunctionalContext(T)
        print(name)
        print(f"{'r':>8} {'F':>14} {'dF/dr':>14} {'Phi':>14}")
        for r in np.geomspace(1.2, 20.0, 8):
            xi = np.array([0.0, 0.6, 0.8]) * r
            print(f"{r:8.3f} {eval_F(ctx, xi):14.6e} {float(radial_derivative_F(ctx, xi)):14.6e} "
                  f"{phi_lower_bound(r):14.6e}")


if __name__ == "__main__":
    main()
