"""
Product quadrature on translated unit spheres and balls.

Sphere rules are Gauss-Legendre in z = cos(theta) times a uniform rule in the
azimuth.  The polar rule may be composite: breakpoints in z split [-1, 1] into
panels, each carrying its own Gauss-Legendre rule.  Composite rules keep the
exactness of the per-panel rule and are used to resolve integrands with sharp
latitudinal features (narrow bands of an axisymmetric profile).

Ball rules are a Gauss-Legendre rule in the radius times a sphere rule.
For fields homogeneous in x, integrate_ball_homogeneous does the radial
integral in closed form along each ray and integrates over directions only.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import DomainError, EvaluationError, InvalidArgumentError

__all__ = [
    "QuadratureGrid",
    "RadialRule",
    "build_sphere_grid",
    "build_radial_rule",
    "integrate_sphere",
    "integrate_sphere_graded",
    "integrate_ball",
    "DEFAULT_N_POLAR",
    "DEFAULT_RADIAL_NODES",
    "AdaptedSphereRule",
    "build_adapted_sphere_rule",
    "integrate_sphere_adapted",
    "integrate_ball_homogeneous",
]

DEFAULT_N_POLAR = 32
DEFAULT_RADIAL_NODES = 48
# centers this close to the origin get one automatic doubling of resolution
NEAR_SINGULAR_RADIUS = 1.1


@lru_cache(maxsize=64)
def _gauss_legendre(n):
    z, w = np.polynomial.legendre.leggauss(n)
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Product rule on the unit sphere.

    Attributes
    ----------
    polar_nodes : ndarray, shape (n, 2)
        Columns are z = cos(theta) and the polar weight.
    azimuthal_count : int
        Number of equispaced azimuthal nodes.
    exactness_degree : int
        Every spherical harmonic of degree <= exactness_degree is
        integrated exactly.
    panel_size : int
        Nodes per polar panel (equal to n for a plain rule).
    breakpoints : tuple of float
        Interior panel boundaries in z.
    """

    polar_nodes: np.ndarray
    azimuthal_count: int
    exactness_degree: int
    panel_size: int = 0
    breakpoints: tuple = ()

    @property
    def n_polar(self):
        return self.panel_size or len(self.polar_nodes)

    @cached_property
    def cos_theta(self):
        return np.repeat(self.polar_nodes[:, 0], self.azimuthal_count)

    @cached_property
    def sin_theta(self):
        return np.sqrt(1.0 - self.cos_theta**2)

    @cached_property
    def phi(self):
        m = self.azimuthal_count
        return np.tile(2.0 * np.pi * np.arange(m) / m, len(self.polar_nodes))

    @cached_property
    def points(self):
        """Unit vectors y of all nodes, shape (N, 3)."""
        s = self.sin_theta
        pts = np.stack([s * np.cos(self.phi), s * np.sin(self.phi), self.cos_theta], axis=-1)
        pts.setflags(write=False)
        return pts

    @cached_property
    def weights(self):
        w = np.repeat(self.polar_nodes[:, 1], self.azimuthal_count) * (
            2.0 * np.pi / self.azimuthal_count
        )
        w.setflags(write=False)
        return w

    @property
    def size(self):
        return len(self.polar_nodes) * self.azimuthal_count

    def refined(self):
        """Same panel layout with twice the nodes per panel."""
        return build_sphere_grid(2 * self.n_polar, breakpoints=self.breakpoints)


@dataclass(frozen=True, eq=False)
class RadialRule:
    """Gauss-Legendre rule on [0, 1]."""

    node_count: int
    nodes: np.ndarray
    weights: np.ndarray


def build_sphere_grid(n_polar, breakpoints=None, azimuthal_count=None):
    """Gauss-Legendre x uniform-azimuth rule on the unit sphere.

    Parameters
    ----------
    n_polar : int
        Gauss-Legendre nodes per polar panel (>= 2).
    breakpoints : sequence of float, optional
        Interior panel boundaries in z; values outside (-1, 1) are dropped.
    azimuthal_count : int, optional
        Defaults to 2 * n_polar.
    """
    if int(n_polar) != n_polar or n_polar < 2:
        raise InvalidArgumentError(f"n_polar must be an integer >= 2, got {n_polar!r}")
    n_polar = int(n_polar)
    bps = sorted({float(b) for b in (breakpoints or ()) if -1.0 < b < 1.0})
    edges = [-1.0] + bps + [1.0]
    z0, w0 = _gauss_legendre(n_polar)
    zs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a <= 0.0:
            continue
        zs.append(0.5 * (a + b) + 0.5 * (b - a) * z0)
        ws.append(0.5 * (b - a) * w0)
    polar = np.column_stack([np.concatenate(zs), np.concatenate(ws)])
    polar.setflags(write=False)
    m = 2 * n_polar if azimuthal_count is None else int(azimuthal_count)
    if m < 1:
        raise InvalidArgumentError("azimuthal_count must be positive")
    # azimuthal rule is exact for trigonometric degree m - 1
    degree = min(2 * n_polar - 1, m - 1)
    return QuadratureGrid(polar, m, degree, panel_size=n_polar, breakpoints=tuple(bps))


def build_radial_rule(node_count=DEFAULT_RADIAL_NODES):
    if int(node_count) != node_count or node_count < 1:
        raise InvalidArgumentError(f"node_count must be a positive integer, got {node_count!r}")
    z, w = _gauss_legendre(int(node_count))
    nodes = 0.5 * (z + 1.0)
    weights = 0.5 * w
    return RadialRule(int(node_count), nodes, weights)


def _near_singular(center):
    r = np.linalg.norm(center)
    return 1.0 < r <= NEAR_SINGULAR_RADIUS


def _check_finite(values, nodes):
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.flatnonzero(bad.reshape(len(nodes), -1).any(axis=-1))[0])
        raise EvaluationError(f"non-finite integrand at node {nodes[i]}", node=nodes[i])


def integrate_sphere(f, center, grid, origin_singular=True):
    """Integrate a vectorized scalar field over the unit sphere about ``center``.

    ``f`` receives an array of points of shape (N, 3) and returns N values.
    When ``origin_singular`` is set and 1 < |center| <= 1.1 the grid is
    refined once.
    """
    center = np.asarray(center, dtype=float)
    if origin_singular and _near_singular(center):
        grid = grid.refined()
    x = center + grid.points
    vals = np.asarray(f(x), dtype=float)
    _check_finite(vals, x)
    return float(grid.weights @ vals)


def integrate_sphere_graded(f, center, n_polar=32, azimuthal_count=None):
    """Sphere integral for fields singular only at the origin.

    The grid's pole is aligned with ``center`` so the point nearest the
    origin sits at z = -1, and polar panels are graded geometrically toward
    it when that point is within (|c| - 1)^2 / (2 |c|) of a pole of |x|^-2.
    """
    center = np.asarray(center, dtype=float)
    r = float(np.linalg.norm(center))
    if not r > 1.0:
        raise DomainError("unit sphere about center must avoid the origin")
    gap = (r - 1.0) ** 2 / (2.0 * r)
    breaks = []
    edge = 4.0 * gap
    while edge < 0.5:
        breaks.append(-1.0 + edge)
        edge *= 4.0
    grid = build_sphere_grid(n_polar, breakpoints=breaks, azimuthal_count=azimuthal_count)
    x = center + grid.points @ _frame(center / r).T
    vals = np.asarray(f(x), dtype=float)
    _check_finite(vals, x)
    return float(grid.weights @ vals)


def integrate_ball(f, center, grid, radial, origin_singular=True):
    """Integrate a vectorized scalar field over the unit ball about ``center``.

    Raises
    ------
    DomainError
        If ``origin_singular`` and the ball contains the origin.
    """
    center = np.asarray(center, dtype=float)
    if origin_singular and np.linalg.norm(center) <= 1.0:
        raise DomainError("ball of radius 1 about center contains the origin")
    if origin_singular and _near_singular(center):
        grid = grid.refined()
    r = radial.nodes
    x = center + r[:, None, None] * grid.points[None, :, :]
    pts = x.reshape(-1, 3)
    vals = np.asarray(f(pts), dtype=float)
    _check_finite(vals, pts)
    vals = vals.reshape(len(r), grid.size)
    return float((radial.weights * r**2) @ (vals @ grid.weights))


# --- level-adapted rules -------------------------------------------------
#
# Axisymmetric profiles psi(t), t = x3/|x|, can carry narrow bands.  A product
# rule aligned with the sphere's own pole only follows those bands when the
# center sits on the x3 axis.  The rules below place panel breaks on every
# meridian where it crosses a prescribed level t = t_b.  Meridians are
# parametrized by theta (not cos theta) so that each meridian integrand stays
# analytic at the poles.


@dataclass(frozen=True, eq=False)
class AdaptedSphereRule:
    """Nodes (unit directions) and weights of a level-adapted sphere rule."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self):
        return len(self.weights)


def _level_of(center, radius, theta, chi):
    s = np.sin(theta)
    x = center[0] + radius * s * np.cos(chi)
    y = center[1] + radius * s * np.sin(chi)
    z = center[2] + radius * np.cos(theta)
    return z / np.sqrt(x * x + y * y + z * z)


def _bisect(fn, lo, hi, iterations=55):
    flo = fn(lo)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        same = np.sign(fm) == np.sign(flo)
        lo = np.where(same, mid, lo)
        flo = np.where(same, fm, flo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def _meridian_crossings(center, radius, levels, chi, samples):
    """Per-meridian sorted theta values where t crosses one of ``levels``.

    Each meridian is first cut at the extrema of t so that every level is
    crossed at most once per monotone piece; a level touched twice inside
    one sampling interval is then still found.
    """
    m = len(chi)
    theta = np.linspace(0.0, np.pi, samples)
    tt = _level_of(center, radius, theta[None, :], chi[:, None])
    slope = np.sign(np.diff(tt, axis=1))
    rows, cols = np.nonzero(slope[:, :-1] * slope[:, 1:] < 0.0)
    # refine each extremum by bisection on the sign of dt/dtheta
    eps = 1e-7
    ch = chi[rows]

    def dt(th):
        return _level_of(center, radius, th + eps, ch) - _level_of(center, radius, th - eps, ch)

    ext = _bisect(dt, theta[cols], theta[cols + 2]) if rows.size else np.empty(0)
    found = [[] for _ in range(m)]
    cuts = [[0.0] for _ in range(m)]
    for r, e in zip(rows, ext):
        cuts[r].append(float(e))
    piece_row, piece_lo, piece_hi = [], [], []
    for j in range(m):
        edges = sorted(cuts[j]) + [np.pi]
        for a, b in zip(edges[:-1], edges[1:]):
            if b > a:
                piece_row.append(j)
                piece_lo.append(a)
                piece_hi.append(b)
    piece_row = np.asarray(piece_row)
    piece_lo = np.asarray(piece_lo)
    piece_hi = np.asarray(piece_hi)
    ch_p = chi[piece_row]
    t_lo = _level_of(center, radius, piece_lo, ch_p)
    t_hi = _level_of(center, radius, piece_hi, ch_p)
    for level in levels:
        hit = (t_lo - level) * (t_hi - level) < 0.0
        if not hit.any():
            continue
        ch_h = ch_p[hit]
        roots = _bisect(
            lambda th: _level_of(center, radius, th, ch_h) - level, piece_lo[hit], piece_hi[hit]
        )
        for j, th in zip(piece_row[hit], roots):
            found[j].append(float(th))
    return found


def build_adapted_sphere_rule(center, levels, n_panel=24, azimuthal_count=256,
                              radius=1.0, samples=129):
    """Sphere rule about ``center`` with panel breaks at the given t-levels.

    Parameters
    ----------
    center : array_like, shape (3,)
    levels : sequence of float
        Values of t = x3/|x| at which the integrand may be non-smooth.
    n_panel : int
        Gauss-Legendre nodes per panel on each meridian.
    azimuthal_count : int
        Number of equispaced meridians.
    radius : float
        Sphere radius; points returned are unit directions.

    Returns
    -------
    AdaptedSphereRule
        Weights integrate over the unit sphere of directions (total 4 pi).
    """
    center = np.asarray(center, dtype=float)
    if n_panel < 2 or azimuthal_count < 1:
        raise InvalidArgumentError("n_panel must be >= 2 and azimuthal_count >= 1")
    m = int(azimuthal_count)
    # meridians start at the center's azimuth: rotations about x3 map rules onto rules
    chi = np.arctan2(center[1], center[0]) + 2.0 * np.pi * np.arange(m) / m
    levels = [float(v) for v in levels if -1.0 < v < 1.0]
    if np.linalg.norm(center) <= radius:
        # origin inside: t is not a function on the sphere, keep a plain rule
        levels = []
    crossings = _meridian_crossings(center, radius, levels, chi, samples)
    z0, w0 = _gauss_legendre(int(n_panel))
    pts, wts = [], []
    for j in range(m):
        edges = np.array([0.0] + sorted(crossings[j]) + [np.pi])
        a, b = edges[:-1], edges[1:]
        th = (0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * z0).ravel()
        w = (0.5 * (b - a)[:, None] * w0).ravel() * np.sin(th)
        s = np.sin(th)
        pts.append(np.column_stack([s * np.cos(chi[j]), s * np.sin(chi[j]), np.cos(th)]))
        wts.append(w * (2.0 * np.pi / m))
    return AdaptedSphereRule(np.concatenate(pts), np.concatenate(wts))


def integrate_sphere_adapted(f, center, levels, n_panel=24, azimuthal_count=256):
    """Unit-sphere integral of ``f`` about ``center`` using a level-adapted rule."""
    center = np.asarray(center, dtype=float)
    rule = build_adapted_sphere_rule(center, levels, n_panel, azimuthal_count)
    x = center + rule.points
    vals = np.asarray(f(x), dtype=float)
    _check_finite(vals, x)
    return float(rule.weights @ vals)


def _full_circle(A, gap, t, w, z0, w0):
    """Azimuths for a circle lying inside the cone.

    At dphi = pi the circle comes within ``gap`` of the cone boundary and the
    integrand varies on the scale d = sqrt(2 gap / A) there.  For small d each
    half circle is mapped through dphi = pi -+ d sinh(tau) with Gauss-Legendre
    nodes in tau, which stays accurate uniformly as gap -> 0; otherwise the
    trapezoid rule is used.
    """
    d = np.sqrt(2.0 * gap / A) if A > 0.0 else np.inf
    if d >= 0.5:
        return t, w
    T = np.arcsinh(np.pi / d)
    tau = 0.5 * T * (z0 + 1.0)
    psi = d * np.sinh(tau)
    wt = 0.5 * T * w0 * d * np.cosh(tau)
    return np.concatenate([np.pi - psi, np.pi + psi]), np.concatenate([wt, wt])


def _radial_moment(rho_lo, rho_hi, degree):
    # integral of rho**(degree + 2) over [rho_lo, rho_hi]
    a = degree + 3
    if a == 0:
        return np.log(rho_hi / rho_lo)
    return (rho_hi**a - rho_lo**a) / a


def _frame(e):
    """Rotation matrix whose third column is the unit vector e."""
    a = np.array([1.0, 0.0, 0.0]) if abs(e[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(a, e)
    u /= np.linalg.norm(u)
    return np.column_stack([u, np.cross(e, u), e])


def integrate_ball_homogeneous(f, center, degree, levels=(), n_panel=32, n_arc=32):
    """Unit-ball integral of a field homogeneous of the given degree in x.

    Writing x = rho * omega, the radial integral along each ray through the
    ball is done in closed form, leaving an integral over the cone of
    directions that meet the ball.  Directions are parametrized by polar
    angle Theta about the x3 axis (composite Gauss-Legendre with breaks at the
    given t-levels and where circles of latitude start or stop meeting the
    cone) and an azimuthal arc mapped through a sine substitution that
    absorbs the square-root vanishing at the cone boundary.

    Parameters
    ----------
    f : callable
        Vectorized field evaluated at unit directions omega, shape (N, 3).
    center : array_like, shape (3,)
        Ball center, |center| > 1.
    degree : float
        Homogeneity degree p, f(rho * omega) = rho**p * f(omega).
    levels : sequence of float
        t-levels (x3/|x|) at which f may be non-smooth.
    """
    center = np.asarray(center, dtype=float)
    cn = float(np.linalg.norm(center))
    if cn <= 1.0:
        raise DomainError("ball of radius 1 about center contains the origin")
    e = center / cn
    active = [v for v in levels if -1.0 < v < 1.0]
    if not active and e[2] < 1.0 - 1e-15:
        # nothing ties the rule to the x3 axis: put the pole on the center
        R = _frame(e)
        return integrate_ball_homogeneous(lambda w: f(w @ R.T), [0.0, 0.0, cn], degree, (),
                                          n_panel, n_arc)
    alpha = np.arcsin(1.0 / cn)
    cos_alpha = np.cos(alpha)
    theta_c = np.arccos(np.clip(e[2], -1.0, 1.0))
    phi_c = np.arctan2(center[1], center[0])
    lo, hi = max(0.0, theta_c - alpha), min(np.pi, theta_c + alpha)
    cuts = [lo, hi, alpha - theta_c, 2.0 * np.pi - theta_c - alpha]
    cuts += [np.arccos(v) for v in levels if -1.0 < v < 1.0]
    cuts = sorted({c for c in cuts if lo <= c <= hi})

    z0, w0 = _gauss_legendre(int(n_panel))
    u0, uw = _gauss_legendre(int(n_arc))
    # smoothstep map clusters nodes at panel ends (square-root behaviour there)
    s = 0.5 * (z0 + 1.0)
    step, dstep = 3 * s**2 - 2 * s**3, 3.0 * s * (1.0 - s) * w0
    n_full = 2 * int(n_arc)
    full_phi = 2.0 * np.pi * np.arange(n_full) / n_full
    full_w = np.full(n_full, 2.0 * np.pi / n_full)
    arc_sin, arc_w = np.sin(0.5 * np.pi * u0), np.cos(0.5 * np.pi * u0) * 0.5 * np.pi * uw

    dirs, wts = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a < 1e-15:
            continue
        for th, wth in zip(a + (b - a) * step, (b - a) * dstep):
            st, ct = np.sin(th), np.cos(th)
            # <omega, e> = A cos(dphi) + B
            A, B = st * np.sin(theta_c), ct * np.cos(theta_c)
            if A + B <= cos_alpha:
                continue
            if B - A >= cos_alpha:
                ph, wph = _full_circle(A, B - A - cos_alpha, full_phi, full_w, u0, uw)
            else:
                half = np.arccos(np.clip((cos_alpha - B) / A, -1.0, 1.0))
                ph, wph = half * arc_sin, half * arc_w
            om = np.column_stack([st * np.cos(ph + phi_c), st * np.sin(ph + phi_c), np.full_like(ph, ct)])
            proj = cn * (om @ e)
            root = np.sqrt(np.clip(proj**2 - cn * cn + 1.0, 0.0, None))
            moment = _radial_moment(proj - root, proj + root, degree)
            dirs.append(om)
            wts.append(wth * st * wph * moment)
    if not dirs:
        return 0.0
    om = np.concatenate(dirs)
    vals = np.asarray(f(om), dtype=float)
    _check_finite(vals, om)
    return float(np.concatenate(wts) @ vals)
