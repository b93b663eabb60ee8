"""
The reduced functional

    F(xi) = S(|xi|) + (1/4 pi) ( int_{|x-xi|=1} tr_S T  -  2 int_{|x-xi|<1} tr T ),

its radial derivative, the flux pair (G, K) and a critical-point search.

S is the Schwarzschild contribution.  G(s) is the bracket above at s xi and
K(s) the ball integral of the linearized scalar-curvature density at s xi;
they satisfy s G'(s) = G(s) + K(s).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryError, DomainError, InconsistencyError, InvalidArgumentError
from .quadrature import (
    DEFAULT_N_POLAR,
    DEFAULT_RADIAL_NODES,
    QuadratureGrid,
    RadialRule,
    build_adapted_sphere_rule,
    build_radial_rule,
    build_sphere_grid,
    integrate_ball_homogeneous,
    integrate_sphere_graded,
)
from .tensors import (
    PerturbationTensor,
    ZeroTensor,
    divergence_integrand,
    scalar_density,
    trace_ambient,
    trace_sphere,
)

__all__ = [
    "FunctionalContext",
    "CriticalPointReport",
    "schwarzschild_part",
    "phi_lower_bound",
    "eval_F",
    "eval_G",
    "eval_K",
    "eval_K_divergence",
    "flux_residual",
    "radial_derivative_F",
    "RadialDerivative",
    "find_critical_point",
    "finite_difference_derivatives",
    "scan_row",
    "SCAN_COLUMNS",
]

MIN_XI = 1.0 + 1e-6
CLAMP_RADIUS = 1.02
FD_STEP = 1e-4
GRADIENT_TOL = 1e-8
MAX_ITERATIONS = 200
DEGENERATE_RATIO = 1e-6
RADIAL_CONSISTENCY = 1e-4
# initial trust radius; the wells built by the counterexample are ~0.1 wide
TRUST_RADIUS = 0.05

SCAN_COLUMNS = ("xi1", "xi2", "xi3", "r", "F", "dF_radial", "phi_lower_bound", "G1", "K1",
                "flux_residual")


def _check_r(r):
    r = float(r)
    if not r > 1.0:
        raise DomainError(f"r must exceed 1, got {r!r}")
    return r


SERIES_RADIUS = 1.2


def _series_u(coef, r):
    # sum_{m >= 3} coef(m) u^m with u = r^-2; used where the closed forms cancel
    u = 1.0 / (r * r)
    m, term, total = 3, u**3, 0.0
    while True:
        add = coef(m) * term
        total += add
        if abs(add) <= 1e-18 * abs(total):
            return total
        m += 1
        term *= u


def _s_coef(m):
    return -16.0 / (m + 1) + 30.0 / (2 * m + 1) - 2.0 / (2 * m - 1)


def _phi_coef(m):
    return -2.0 * m * _s_coef(m)


def schwarzschild_part(r):
    """-14 + 16 r^2 log((r^2-1)/r^2) + (15 r - 1/r) log((r+1)/(r-1)).

    For r >= SERIES_RADIUS the power series in r^-2 is summed instead; its
    first three coefficients vanish, so S = O(r^-6).
    """
    r = _check_r(r)
    if r >= SERIES_RADIUS:
        return _series_u(_s_coef, r)
    return (-14.0 + 16.0 * r * r * math.log1p(-1.0 / (r * r))
            + (15.0 * r - 1.0 / r) * math.log((r + 1.0) / (r - 1.0)))


def phi_lower_bound(r):
    """Radial derivative r S'(r) of the Schwarzschild part (a lower bound for
    the radial derivative of F when the scalar density is nonnegative).

    Every coefficient of its series in r^-2 is positive.
    """
    r = _check_r(r)
    if r >= SERIES_RADIUS:
        return _series_u(_phi_coef, r)
    return (32.0 * r * r * math.log1p(-1.0 / (r * r))
            + (15.0 * r + 1.0 / r) * math.log((r + 1.0) / (r - 1.0))
            + 2.0 * (r * r + 1.0) / (r * r - 1.0))


@dataclass(frozen=True, eq=False)
class FunctionalContext:
    """Tensor plus quadrature resolution used by every evaluation.

    Sphere integrals of tensors with sharp t-bands (``t_breakpoints``) use
    level-adapted meridian rules with ``sphere_grid.n_polar`` nodes per panel
    and ``sphere_grid.azimuthal_count`` meridians; other sphere integrals use
    the product grid.  Ball integrals exploit homogeneity and run over the
    cone of directions meeting the ball with ``radial.node_count`` nodes per
    panel.
    """

    tensor: PerturbationTensor
    sphere_grid: QuadratureGrid = field(default_factory=lambda: build_sphere_grid(DEFAULT_N_POLAR))
    radial: RadialRule = field(default_factory=lambda: build_radial_rule(DEFAULT_RADIAL_NODES))

    def __post_init__(self):
        if self.sphere_grid.exactness_degree < 31:
            raise InvalidArgumentError("sphere grid must integrate degree 31 exactly")

    @property
    def levels(self):
        return tuple(getattr(self.tensor, "t_breakpoints", ()) or ())

    def sphere_integral(self, fn, center):
        center = np.asarray(center, dtype=float)
        if self.levels:
            g = self.sphere_grid
            rule = build_adapted_sphere_rule(center, self.levels, g.n_polar, g.azimuthal_count)
            return float(rule.weights @ fn(center + rule.points))
        g = self.sphere_grid
        return integrate_sphere_graded(fn, center, g.n_polar, g.azimuthal_count)

    def ball_integral(self, fn, center, degree):
        n = self.radial.node_count
        return integrate_ball_homogeneous(fn, center, degree, self.levels, n, n)


def _check_xi(xi, s=1.0):
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (3,):
        raise InvalidArgumentError("xi must be a point in R^3")
    c = s * xi
    if not np.linalg.norm(c) > MIN_XI:
        raise DomainError(f"|xi| must exceed 1 + 1e-6, got {np.linalg.norm(c)!r}")
    return c


def eval_G(ctx: FunctionalContext, xi, s=1.0):
    """Sphere trace minus twice the ball trace, about s xi."""
    c = _check_xi(xi, s)
    T = ctx.tensor
    if isinstance(T, ZeroTensor):
        return 0.0
    surf = ctx.sphere_integral(lambda x: trace_sphere(T, c, x), c)
    ball = ctx.ball_integral(lambda x: trace_ambient(T, x), c, -2)
    return surf - 2.0 * ball


def eval_K(ctx: FunctionalContext, xi, s=1.0):
    """Ball integral of the scalar density about s xi."""
    c = _check_xi(xi, s)
    T = ctx.tensor
    if isinstance(T, ZeroTensor):
        return 0.0
    return ctx.ball_integral(lambda x: scalar_density(T, x), c, -4)


def eval_K_divergence(ctx: FunctionalContext, xi, s=1.0):
    """K computed as a surface integral after applying the divergence theorem."""
    c = _check_xi(xi, s)
    T = ctx.tensor
    if isinstance(T, ZeroTensor):
        return 0.0
    return ctx.sphere_integral(lambda x: divergence_integrand(T, c, x), c)


def eval_F(ctx: FunctionalContext, xi):
    c = _check_xi(xi)
    return schwarzschild_part(np.linalg.norm(c)) + eval_G(ctx, c) / (4.0 * math.pi)


def _richardson_derivative(f, x, h):
    d_h = (f(x + h) - f(x - h)) / (2.0 * h)
    d_half = (f(x + 0.5 * h) - f(x - 0.5 * h)) / h
    return (4.0 * d_half - d_h) / 3.0


def flux_residual(ctx: FunctionalContext, xi, s=1.0):
    """|s G'(s) - G(s) - K(s)| with G' from extrapolated central differences."""
    _check_xi(xi, s)
    h = FD_STEP * s
    dG = _richardson_derivative(lambda u: eval_G(ctx, xi, u), s, h)
    return abs(s * dG - eval_G(ctx, xi, s) - eval_K(ctx, xi, s))


class RadialDerivative(float):
    """Finite-difference radial derivative with the flux-based value attached."""

    def __new__(cls, value, flux_value):
        obj = super().__new__(cls, value)
        obj.flux_value = float(flux_value)
        return obj


def radial_derivative_F(ctx: FunctionalContext, xi, tol=RADIAL_CONSISTENCY):
    """d/ds F(s xi) at s = 1.

    The finite-difference value is returned; the flux-based value
    Phi(|xi|) + (G(1) + K(1)) / (4 pi) is attached as ``flux_value``.

    Raises
    ------
    InconsistencyError
        If the two routes differ by more than ``tol``.
    """
    c = _check_xi(xi)
    fd = _richardson_derivative(lambda u: eval_F(ctx, u * c), 1.0, FD_STEP)
    flux = phi_lower_bound(np.linalg.norm(c)) + (eval_G(ctx, c) + eval_K(ctx, c)) / (4.0 * math.pi)
    if abs(fd - flux) > tol:
        raise InconsistencyError(
            f"radial derivative routes disagree: finite difference {fd:.10g}, flux {flux:.10g}"
        )
    return RadialDerivative(fd, flux)


# ----------------------------------------------------------- critical points


def finite_difference_derivatives(f, x, h=FD_STEP):
    """Richardson-extrapolated central-difference gradient and Hessian."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    eye = np.eye(n)
    f0 = f(x)
    cache = {}

    def val(offset):
        key = tuple(np.round(offset / (0.5 * h)).astype(int))
        if key not in cache:
            cache[key] = f(x + offset)
        return cache[key]

    def grad_hess(step):
        g = np.empty(n)
        H = np.empty((n, n))
        for i in range(n):
            fp, fm = val(step * eye[i]), val(-step * eye[i])
            g[i] = (fp - fm) / (2.0 * step)
            H[i, i] = (fp - 2.0 * f0 + fm) / step**2
            for j in range(i + 1, n):
                pp = val(step * (eye[i] + eye[j]))
                pm = val(step * (eye[i] - eye[j]))
                mp = val(-step * (eye[i] - eye[j]))
                mm = val(-step * (eye[i] + eye[j]))
                H[i, j] = H[j, i] = (pp - pm - mp + mm) / (4.0 * step**2)
        return g, H

    g1, H1 = grad_hess(h)
    g2, H2 = grad_hess(0.5 * h)
    return f0, (4.0 * g2 - g1) / 3.0, (4.0 * H2 - H1) / 3.0


@dataclass(frozen=True)
class CriticalPointReport:
    xi: np.ndarray
    gradient_norm: float
    hessian_eigenvalues: np.ndarray
    classification: str
    iterations: int
    converged: bool = True
    value: float = float("nan")


def classify(eigenvalues, ratio=DEGENERATE_RATIO):
    eig = np.asarray(eigenvalues, dtype=float)
    scale = np.max(np.abs(eig))
    if scale == 0.0 or np.min(np.abs(eig)) < ratio * scale:
        return "degenerate"
    if np.all(eig > 0):
        return "strict-min"
    if np.all(eig < 0):
        return "max"
    return "saddle"


def _clamp(x, radius):
    r = np.linalg.norm(x)
    return x if r >= radius else x * (radius / r)


def find_critical_point(ctx: FunctionalContext, xi0, tol=GRADIENT_TOL,
                        max_iterations=MAX_ITERATIONS, clamp=CLAMP_RADIUS, radius=TRUST_RADIUS,
                        objective=None, step=FD_STEP):
    """Trust-region Newton iteration on finite-difference derivatives of F.

    ``objective`` replaces eval_F (used for F_lambda).  Raises BoundaryError
    when an iterate is pushed against the clamp |xi| = ``clamp`` while the
    function still decreases outward of the admissible region.
    """
    xi = np.asarray(xi0, dtype=float).copy()
    if not np.linalg.norm(xi) > 1.05:
        raise DomainError("starting point must satisfy |xi0| > 1.05")
    f = objective if objective is not None else (lambda p: eval_F(ctx, p))
    value, g, H = finite_difference_derivatives(f, xi, step)
    it = 0
    while it < max_iterations:
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            eig = np.linalg.eigvalsh(0.5 * (H + H.T))
            return CriticalPointReport(xi, gnorm, eig, classify(eig), it, True, value)
        it += 1
        move = _trust_step(g, H, radius)
        trial = _clamp(xi + move, clamp)
        actual = f(trial) - value
        predicted = float(g @ (trial - xi) + 0.5 * (trial - xi) @ H @ (trial - xi))
        rho = actual / predicted if predicted < 0 else (1.0 if actual < 0 else -1.0)
        if rho > 0.0 or (abs(actual) < 1e-13 and gnorm < 1e-6):
            at_clamp = np.linalg.norm(xi + move) < clamp
            xi = trial
            value, g, H = finite_difference_derivatives(f, xi, step)
            if at_clamp and float(g @ xi) > 0.0:
                raise BoundaryError(
                    f"iterate reached |xi| = {clamp} with F still decreasing inward",
                    last_iterate=xi.copy(),
                )
            if rho > 0.75 and np.linalg.norm(move) > 0.9 * radius:
                radius = min(2.0 * radius, 1.0)
            elif rho < 0.25:
                radius *= 0.25
        else:
            radius *= 0.25
            if radius < 1e-12:
                break
    eig = np.linalg.eigvalsh(0.5 * (H + H.T))
    return CriticalPointReport(xi, float(np.linalg.norm(g)), eig, "degenerate", it, False, value)


def _trust_step(g, H, radius):
    w, V = np.linalg.eigh(0.5 * (H + H.T))
    gc = V.T @ g
    if np.all(w > 0):
        p = -gc / w
        if np.linalg.norm(p) <= radius:
            return V @ p
    # Levenberg shift: find mu > -min(w) with |p(mu)| = radius
    lo = max(0.0, -w.min()) + 1e-14 * max(1.0, abs(w).max())
    hi = lo + np.linalg.norm(g) / radius + abs(w).max() + 1.0

    def norm_at(mu):
        return np.linalg.norm(gc / (w + mu))

    if norm_at(lo) < radius:
        # hard case: move along the lowest mode as well
        p = -gc / (w + lo)
        extra = math.sqrt(max(radius**2 - p @ p, 0.0))
        p[np.argmin(w)] += -extra if gc[np.argmin(w)] > 0 else extra
        return V @ p
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if norm_at(mid) > radius:
            lo = mid
        else:
            hi = mid
    return V @ (-gc / (w + hi))


def scan_row(ctx: FunctionalContext, xi, with_flux=True):
    """One row of an F scan (see SCAN_COLUMNS)."""
    xi = _check_xi(xi)
    r = float(np.linalg.norm(xi))
    F = eval_F(ctx, xi)
    G1 = eval_G(ctx, xi)
    K1 = eval_K(ctx, xi)
    dF = radial_derivative_F(ctx, xi)
    res = flux_residual(ctx, xi) if with_flux else float("nan")
    return dict(zip(SCAN_COLUMNS, (xi[0], xi[1], xi[2], r, F, float(dF), phi_lower_bound(r),
                                   G1, K1, res)))
