"""
Geometry of graphs over translated spheres.

All computations use the rescaled coordinate z = x / lambda, in which the
surface is z(y) = xi + (1 + w(y)) y for y on the unit sphere and the metric is
g(lambda z).  Physical values follow by scaling with powers of lambda.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import GeometryError, InvalidArgumentError
from ..quadrature import build_adapted_sphere_rule, build_sphere_grid, _gauss_legendre
from .harmonics import HarmonicBasis, harmonic_indices
from .metric import MetricSpec, det3, metric_components

__all__ = [
    "SurfaceRule",
    "SphericalGraph",
    "Geometry",
    "surface_rule",
    "graph_geometry",
    "scaled_geometry",
    "MAX_HEIGHT",
]

MAX_HEIGHT = 0.1
VOLUME_NODES = 16


@dataclass(frozen=True, eq=False)
class SurfaceRule:
    """Quadrature nodes on the parameter sphere with a harmonic basis (l != 1)."""

    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    basis: HarmonicBasis
    first: np.ndarray  # y_1, y_2, y_3 at the nodes, shape (3, N)

    @property
    def points(self):
        return self.first.T

    @property
    def degree(self):
        return max(l for l, _ in self.basis.indices)


def surface_rule(xi, L, n_polar=24, azimuthal_count=None, levels=()):
    """Parameter-sphere rule for degree-L graphs about ``xi``.

    With ``levels`` the rule follows the t-bands of the metric on the unit
    sphere about xi (the graph stays within a small height of it).
    """
    if L < 2:
        raise InvalidArgumentError("degree must be at least 2")
    m = 2 * n_polar if azimuthal_count is None else int(azimuthal_count)
    if m <= 2 * L:
        raise InvalidArgumentError("azimuthal_count must exceed 2 L")
    if levels:
        rule = build_adapted_sphere_rule(xi, levels, n_polar, m)
        y, w = rule.points, rule.weights
    else:
        g = build_sphere_grid(n_polar, azimuthal_count=m)
        y, w = np.asarray(g.points), np.asarray(g.weights)
    theta = np.arccos(np.clip(y[:, 2], -1.0, 1.0))
    phi = np.arctan2(y[:, 1], y[:, 0])
    basis = HarmonicBasis.build(L, theta, phi, skip_first=True)
    st = np.sin(theta)
    first = np.array([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])
    return SurfaceRule(theta, phi, np.asarray(w), basis, first)


@dataclass(frozen=True, eq=False)
class SphericalGraph:
    """Graph z = xi + (1 + w) y, with w = u / lambda stored as coefficients.

    ``coefficients`` follow ``harmonic_indices(degree, skip_first=True)``.
    The unscaled height is u = lambda * w (see :meth:`height`).
    """

    xi: np.ndarray
    lam: float
    degree: int
    coefficients: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(harmonic_indices(self.degree, skip_first=True))
        if self.coefficients is None:
            object.__setattr__(self, "coefficients", np.zeros(n))
        elif len(self.coefficients) != n:
            raise InvalidArgumentError(f"expected {n} coefficients for degree {self.degree}")
        if not self.lam > 0:
            raise InvalidArgumentError("lambda must be positive")
        if not np.linalg.norm(self.xi) > 1.0:
            raise InvalidArgumentError("|xi| must exceed 1")

    def rescaled_height(self, rule: SurfaceRule):
        return self.coefficients @ rule.basis.Y

    def height(self, rule: SurfaceRule):
        """Unscaled height u = lambda * w at the rule's nodes."""
        return self.lam * self.rescaled_height(rule)


@dataclass(frozen=True)
class Geometry:
    """Physical and rescaled geometry of one graph."""

    area: float
    volume: float
    H: np.ndarray
    area_scaled: float
    volume_scaled: float
    H_scaled: np.ndarray
    points: np.ndarray  # surface points in rescaled coordinates
    area_density: np.ndarray  # d(area_scaled) per unit parameter weight


def _cross(a, b):
    return np.cross(a, b, axis=0)


def scaled_geometry(m: MetricSpec, xi, lam, coeffs, rule: SurfaceRule, volume=True):
    """Rescaled geometry of z = xi + (1 + w) y."""
    B = rule.basis
    w = coeffs @ B.Y
    if np.max(np.abs(w)) > MAX_HEIGHT:
        raise GeometryError(f"graph height {np.max(np.abs(w)):.3g} exceeds {MAX_HEIGHT}")
    wt, wp = coeffs @ B.Y_t, coeffs @ B.Y_p
    wtt, wtp, wpp = coeffs @ B.Y_tt, coeffs @ B.Y_tp, coeffs @ B.Y_pp
    th, ph = rule.theta, rule.phi
    st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
    zero = np.zeros_like(th)
    y = rule.first
    y_t = np.array([ct * cp, ct * sp, -st])
    y_p = np.array([-st * sp, st * cp, zero])
    y_tp = np.array([-ct * sp, ct * cp, zero])
    y_pp = np.array([-st * cp, -st * sp, zero])
    R = 1.0 + w
    xi = np.asarray(xi, dtype=float)
    X = xi[:, None] + R * y
    X_t = wt * y + R * y_t
    X_p = wp * y + R * y_p
    X_tt = wtt * y + 2.0 * wt * y_t - R * y
    X_tp = wtp * y + wt * y_p + wp * y_t + R * y_tp
    X_pp = wpp * y + 2.0 * wp * y_p + R * y_pp

    pts = X.T
    if np.any(np.linalg.norm(lam * pts, axis=-1) <= 1.0):
        raise GeometryError("surface enters |x| <= 1")
    g, dg = metric_components(m, lam * pts)
    dg = lam * dg  # derivatives with respect to z
    gm = np.moveaxis(g, 0, -1)  # (3, 3, N)

    def form(a, b):
        return np.einsum("in,ijn,jn->n", a, gm, b)

    E, Fm, Gm = form(X_t, X_t), form(X_t, X_p), form(X_p, X_p)
    det = E * Gm - Fm * Fm
    if np.any(det <= 0.0):
        raise GeometryError("degenerate area element")
    n = _cross(X_t, X_p)  # conormal covector, outward
    ginv = np.linalg.inv(g)
    n_up = np.einsum("nij,jn->in", ginv, n)
    nn = np.sqrt(np.einsum("in,in->n", n, n_up))
    N = n_up / nn
    # Christoffel symbols of the first kind contracted with N
    dgm = np.moveaxis(dg, 0, -1)  # (i, j, k, N): d_k g_ij
    gam = 0.5 * (np.swapaxes(dgm, 1, 2) + dgm - np.transpose(dgm, (2, 1, 0, 3)))
    # gam[l, j, k] = 1/2 (d_j g_lk + d_k g_lj - d_l g_jk)
    NG = np.einsum("ln,ljkn->jkn", N, gam)

    def second(a, b, ab):
        return np.einsum("in,in->n", n, ab) / nn + np.einsum("jn,jkn,kn->n", a, NG, b)

    L_tt, L_tp, L_pp = second(X_t, X_t, X_tt), second(X_t, X_p, X_tp), second(X_p, X_p, X_pp)
    H = -(Gm * L_tt - 2.0 * Fm * L_tp + E * L_pp) / det
    density = np.sqrt(det) / st
    area = float(rule.weights @ density)
    vol = _volume(m, xi, lam, R, y, rule.weights) if volume else float("nan")
    return area, vol, H, pts, density


def _volume(m, xi, lam, R, y, weights, nodes=VOLUME_NODES):
    z0, w0 = _gauss_legendre(nodes)
    tau, wt = 0.5 * (z0 + 1.0), 0.5 * w0
    rho = R[None, :] * tau[:, None]  # (nodes, N)
    pts = xi[None, None, :] + rho[..., None] * y.T[None, :, :]
    g, _ = metric_components(m, lam * pts, derivatives=False)
    sq = np.sqrt(det3(g))
    radial = np.einsum("q,qn->n", wt, rho**2 * sq) * R
    return float(weights @ radial)


def graph_geometry(m: MetricSpec, graph: SphericalGraph, rule: SurfaceRule):
    """Physical geometry of a spherical graph, sampled at the rule's nodes."""
    lam = float(graph.lam)
    area, vol, H, pts, dens = scaled_geometry(m, graph.xi, lam, graph.coefficients, rule)
    return Geometry(lam**2 * area, lam**3 * vol, H / lam, area, vol, H, pts, dens)
