"""Real orthonormal spherical harmonics with first and second angular derivatives."""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial, pi, sqrt

import numpy as np
from scipy.special import lpmv

__all__ = ["HarmonicBasis", "harmonic_indices"]


def harmonic_indices(L, skip_first=False):
    """(l, m) pairs for l <= L, m = -l..l, optionally without l = 1."""
    return [(l, m) for l in range(L + 1) if not (skip_first and l == 1) for m in range(-l, l + 1)]


@dataclass(frozen=True, eq=False)
class HarmonicBasis:
    """Values of Y_lm and their theta/phi derivatives at fixed nodes.

    Arrays have shape (n_basis, n_nodes); rows follow ``indices``.
    """

    indices: list
    Y: np.ndarray
    Y_t: np.ndarray
    Y_p: np.ndarray
    Y_tt: np.ndarray
    Y_tp: np.ndarray
    Y_pp: np.ndarray

    @classmethod
    def build(cls, L, theta, phi, skip_first=False):
        idx = harmonic_indices(L, skip_first)
        ct, st = np.cos(theta), np.sin(theta)
        rows = {name: [] for name in ("Y", "Y_t", "Y_p", "Y_tt", "Y_tp", "Y_pp")}
        for l, m in idx:
            a = abs(m)
            norm = sqrt((2 * l + 1) / (4 * pi) * factorial(l - a) / factorial(l + a))
            P = lpmv(a, l, ct)
            P_lower = lpmv(a, l - 1, ct) if l - 1 >= a else np.zeros_like(ct)
            # d/dtheta P_l^a(cos theta) from (1-x^2) P' = (l+a) P_{l-1} - l x P_l
            dP = -((l + a) * P_lower - l * ct * P) / st
            # Legendre equation in theta
            ddP = -ct / st * dP - (l * (l + 1) - a * a / st**2) * P
            if m == 0:
                c, dc, ddc = np.ones_like(phi), np.zeros_like(phi), np.zeros_like(phi)
                f = norm
            elif m > 0:
                c, dc, ddc = np.cos(a * phi), -a * np.sin(a * phi), -a * a * np.cos(a * phi)
                f = sqrt(2.0) * norm
            else:
                c, dc, ddc = np.sin(a * phi), a * np.cos(a * phi), -a * a * np.sin(a * phi)
                f = sqrt(2.0) * norm
            rows["Y"].append(f * P * c)
            rows["Y_t"].append(f * dP * c)
            rows["Y_p"].append(f * P * dc)
            rows["Y_tt"].append(f * ddP * c)
            rows["Y_tp"].append(f * dP * dc)
            rows["Y_pp"].append(f * P * ddc)
        return cls(idx, **{k: np.array(v) for k, v in rows.items()})

    def degrees(self):
        return np.array([l for l, _ in self.indices])
