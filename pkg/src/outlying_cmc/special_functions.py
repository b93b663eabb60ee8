"""
Legendre polynomials and the series that appear in the reduced area.

The three series share the generic term r**(-2l-2) times a rational
coefficient:

    A :  1 / (l + 2)
    B :  1 / (2l + 1)
    C :  (l - 1) / ((l + 2)(2l + 1))  =  1/(l + 2) - 1/(2l + 1)
"""
from __future__ import annotations

import enum
import math

import numpy as np

from .errors import DomainError, InvalidArgumentError

__all__ = [
    "SeriesKind",
    "legendre",
    "legendre_table",
    "series_coefficient",
    "series_closed_form",
    "series_truncated",
    "default_series_terms",
    "generating_residual",
    "inverse_distance_series",
]

MAX_SERIES_TERMS = 10_000


class SeriesKind(enum.Enum):
    A = "A"
    B = "B"
    C = "C"


def legendre_table(L, z):
    """P_0(z) ... P_L(z) by upward recurrence, shape (L + 1,) + z.shape."""
    z = np.asarray(z, dtype=float)
    out = np.empty((L + 1,) + z.shape)
    out[0] = 1.0
    if L >= 1:
        out[1] = z
    for l in range(1, L):
        out[l + 1] = ((2 * l + 1) * z * out[l] - l * out[l - 1]) / (l + 1)
    return out


def legendre(l, z):
    """Legendre polynomial P_l(z) for |z| <= 1 (scalar or array)."""
    if int(l) != l or l < 0:
        raise InvalidArgumentError(f"degree must be a non-negative integer, got {l!r}")
    za = np.asarray(z, dtype=float)
    if np.any(np.abs(za) > 1.0):
        raise InvalidArgumentError("legendre argument must satisfy |z| <= 1")
    val = legendre_table(int(l), za)[int(l)]
    return float(val) if val.ndim == 0 else val


def series_coefficient(kind, l):
    kind = SeriesKind(kind)
    if kind is SeriesKind.A:
        return 1.0 / (l + 2)
    if kind is SeriesKind.B:
        return 1.0 / (2 * l + 1)
    return (l - 1) / ((l + 2) * (2 * l + 1))


def _check_radius(r):
    if not r > 1.0:
        raise DomainError(f"series require r > 1, got {r!r}")


def series_closed_form(kind, r):
    """Closed-form sum of the series of the given kind at r > 1."""
    kind = SeriesKind(kind)
    _check_radius(r)
    # log((r^2 - 1)/r^2) = log1p(-1/r^2) keeps digits for large r
    a = -1.0 - r * r * math.log1p(-1.0 / (r * r))
    b = math.log((r + 1.0) / (r - 1.0)) / (2.0 * r)
    if kind is SeriesKind.A:
        return a
    if kind is SeriesKind.B:
        return b
    return a - b


def series_truncated(kind, r, terms):
    """Partial sum of the first ``terms`` terms (l = 0 ... terms - 1)."""
    kind = SeriesKind(kind)
    _check_radius(r)
    if int(terms) != terms or terms < 1:
        raise InvalidArgumentError("terms must be a positive integer")
    l = np.arange(int(terms), dtype=float)
    if kind is SeriesKind.A:
        c = 1.0 / (l + 2.0)
    elif kind is SeriesKind.B:
        c = 1.0 / (2.0 * l + 1.0)
    else:
        c = (l - 1.0) / ((l + 2.0) * (2.0 * l + 1.0))
    powers = np.power(r, -2.0 * l - 2.0)
    # smallest terms first
    return float(np.sum((c * powers)[::-1]))


def default_series_terms(r):
    """Number of terms with r**(-2 terms) < 1e-14, capped at MAX_SERIES_TERMS."""
    _check_radius(r)
    n = math.ceil(14.0 * math.log(10.0) / (2.0 * math.log(r)))
    return int(min(max(n, 1), MAX_SERIES_TERMS))


def inverse_distance_series(xi, y, L):
    """Partial sums of the Legendre expansions of |y+xi|^-1 and its radial derivative.

    Returns
    -------
    (s1, s2) : tuple of float
        s1 = sum_{l<=L} |xi|^(-l-1) P_l(w),
        s2 = sum_{l<=L} (l+1) |xi|^(-l-1) P_l(w),
        with w = -<y, xi>/|xi|.
    """
    xi = np.asarray(xi, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.linalg.norm(xi)
    w = float(np.clip(-np.dot(y, xi) / r, -1.0, 1.0))
    P = legendre_table(L, w)
    l = np.arange(L + 1)
    pw = r ** (-(l + 1.0))
    return float(np.sum(pw * P)), float(np.sum((l + 1) * pw * P))


def generating_residual(xi, y, L):
    """Absolute truncation errors of the two Legendre generating expansions.

    ``y`` must be a unit vector and |xi| > 1.
    """
    xi = np.asarray(xi, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.linalg.norm(xi) > 1.0:
        raise DomainError("generating series diverge on the unit sphere unless |xi| > 1")
    if int(L) != L or L < 0:
        raise InvalidArgumentError("L must be a non-negative integer")
    d = y + xi
    dist = np.linalg.norm(d)
    exact1 = 1.0 / dist
    exact2 = np.dot(xi, d) / dist**3
    s1, s2 = inverse_distance_series(xi, y, int(L))
    return abs(exact1 - s1), abs(exact2 - s2)
