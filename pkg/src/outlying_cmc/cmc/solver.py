"""
Lyapunov-Schmidt solve for large nearly round CMC-type spheres.

For a center xi and scale lambda we look for a graph z = xi + (1 + w) y with
no first spherical harmonics in w, and multipliers h0..h3, such that

    H - 2/lambda = h0 + h1 y1 + h2 y2 + h3 y3        (Galerkin, degrees <= L)
    vol = 4 pi lambda^3 / 3.

Work happens in rescaled coordinates z = x / lambda where the unknowns are
O(1/lambda); there the first equation reads H_z - 2 = lambda (h0 + h.y).
The multipliers h1..h3 vanish exactly when xi is a critical point of
F_lambda(xi) = (area - 4 pi lambda^2) / 2 pi.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from ..errors import (
    BoundaryError,
    DomainError,
    GeometryError,
    IllConditionedError,
    InvalidArgumentError,
    SolverFailure,
)
from ..functional import CriticalPointReport, classify, finite_difference_derivatives, find_critical_point
from .geometry import SphericalGraph, SurfaceRule, scaled_geometry, surface_rule
from .harmonics import HarmonicBasis
from .metric import MetricSpec

__all__ = [
    "SolveReport",
    "LyapunovSchmidtSolver",
    "lyapunov_schmidt_solve",
    "f_lambda",
    "find_cmc",
    "calibrate_multipliers",
    "CMCResult",
    "legendre_height_profile",
]

TOLERANCE = 1e-10
# Newton keeps polishing below the tolerance: a volume error dV moves the
# area by about 2 dV, which F_lambda amplifies by lambda^2.
POLISH = 1e-13
MAX_NEWTON = 40
MAX_HALVINGS = 8
CONDITION_LIMIT = 1e12
JACOBIAN_STEP = 1e-7
FIND_STEP = 2e-3
FIND_TOL = 5e-4


def _g17(x):
    return float(f"{float(x):.17g}")


@dataclass(frozen=True)
class SolveReport:
    xi: tuple
    lam: float
    degree: int
    h: tuple
    residual: float
    area: float
    volume: float
    rho_sigma: float
    mean_H: float
    outlying_a: float
    f_lambda: float
    iterations: int

    def to_dict(self):
        return {
            "xi": [_g17(v) for v in self.xi],
            "lambda": _g17(self.lam),
            "degree": int(self.degree),
            "area": _g17(self.area),
            "volume": _g17(self.volume),
            "h": [_g17(v) for v in self.h],
            "residual": _g17(self.residual),
            "rho_sigma": _g17(self.rho_sigma),
            "mean_H": _g17(self.mean_H),
            "outlying_a": _g17(self.outlying_a),
            "f_lambda": _g17(self.f_lambda),
            "iterations": int(self.iterations),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @property
    def first_multipliers(self):
        return float(sum(abs(v) for v in self.h[1:]))


class LyapunovSchmidtSolver:
    """Reusable solver for a fixed metric and discretization.

    The finite-difference Jacobian is kept between solves (chord iteration)
    and refreshed only when a step fails to reduce the residual.
    """

    def __init__(self, metric: MetricSpec, lam, degree=8, n_polar=24, azimuthal_count=None,
                 tol=TOLERANCE):
        if not lam >= 100.0 and not metric.flat:
            raise InvalidArgumentError("lambda must be at least 100")
        if degree < 4:
            raise InvalidArgumentError("degree must be at least 4")
        self.metric = metric
        self.lam = float(lam)
        self.degree = int(degree)
        self.n_polar = int(n_polar)
        self.azimuthal_count = azimuthal_count
        self.tol = float(tol)
        self.levels = tuple(getattr(metric.tensor, "t_breakpoints", ()) or ())
        self._jacobian = None
        self._rule_cache = None
        self._last = None

    # -- discretization -------------------------------------------------
    def rule(self, xi):
        key = tuple(np.round(xi, 15)) if self.levels else None
        if self._rule_cache is None or self._rule_cache[0] != key:
            rule = surface_rule(xi, self.degree, self.n_polar, self.azimuthal_count, self.levels)
            full = HarmonicBasis.build(self.degree, rule.theta, rule.phi).Y
            self._rule_cache = (key, rule, full)
        return self._rule_cache[1], self._rule_cache[2]

    def _residual(self, xi, v, rule, full, volume=True):
        nw = len(rule.basis.indices)
        c, hs = v[:nw], v[nw:]
        area, vol, H, pts, dens = scaled_geometry(self.metric, xi, self.lam, c, rule, volume)
        mismatch = H - 2.0 - hs[0] - hs[1:] @ rule.first
        proj = full @ (rule.weights * mismatch)
        res = np.append(proj, vol - 4.0 * math.pi / 3.0)
        return res, (area, vol, H, pts, dens)

    def _norm(self, res):
        return max(float(np.max(np.abs(res[:-1]))), abs(res[-1]) / (4.0 * math.pi / 3.0))

    def _fd_jacobian(self, xi, v, res0, rule, full):
        nw = len(rule.basis.indices)
        J = np.empty((len(res0), len(v)))
        for j in range(nw):
            vp = v.copy()
            vp[j] += JACOBIAN_STEP
            J[:, j] = (self._residual(xi, vp, rule, full)[0] - res0) / JACOBIAN_STEP
        # multipliers enter linearly
        J[:-1, nw] = -(full @ rule.weights)
        for i in range(3):
            J[:-1, nw + 1 + i] = -(full @ (rule.weights * rule.first[i]))
        J[-1, nw:] = 0.0
        cond = np.linalg.cond(J)
        if not cond <= CONDITION_LIMIT:
            raise IllConditionedError(f"Jacobian condition number {cond:.3e}")
        return J

    # -- solve -------------------------------------------------------------
    def solve(self, xi, initial=None):
        xi = np.asarray(xi, dtype=float)
        if not np.linalg.norm(xi) > 1.05:
            raise DomainError("|xi| must exceed 1.05")
        rule, full = self.rule(xi)
        nw = len(rule.basis.indices)
        if initial is None:
            initial = self._last if self._last is not None and len(self._last) == nw + 4 else None
        v = np.zeros(nw + 4) if initial is None else np.array(initial, dtype=float)
        res, geo = self._residual(xi, v, rule, full)
        norm = self._norm(res)
        trace = [norm]
        fresh = False
        it = 0
        target = min(self.tol, POLISH)
        while norm > target:
            if it >= MAX_NEWTON:
                if norm <= self.tol:
                    break
                raise SolverFailure("Newton iteration limit reached", trace)
            if self._jacobian is None:
                self._jacobian = self._fd_jacobian(xi, v, res, rule, full)
                fresh = True
            dv = np.linalg.solve(self._jacobian, -res)
            step = _damped_step(lambda u: self._residual(xi, u, rule, full), self._norm, v, dv, norm)
            it += 1
            if step is None:
                if norm <= self.tol:
                    break  # converged to the requested tolerance; roundoff floor
                if fresh:
                    raise SolverFailure("no damped Newton step reduces the residual", trace)
                self._jacobian = None  # stale chord Jacobian; rebuild and retry
                continue
            v_new, res, geo, n_new = step
            if n_new > 0.1 * norm and not fresh and norm > self.tol:
                self._jacobian = None
            v, norm, fresh = v_new, n_new, False
            trace.append(norm)
        self._last = v.copy()
        graph = SphericalGraph(xi, self.lam, self.degree, v[:nw].copy())
        report = self._report(xi, v, geo, norm, it, rule)
        return graph, report

    def _report(self, xi, v, geo, norm, it, rule):
        lam = self.lam
        area, vol, H, pts, dens = geo
        nw = len(rule.basis.indices)
        hs = v[nw:] / lam
        mean_H = float(rule.weights @ (dens * H)) / area / lam
        rho = lam * _min_radius(xi, v[:nw], rule, pts)
        return SolveReport(
            xi=tuple(float(a) for a in xi),
            lam=lam,
            degree=self.degree,
            h=tuple(float(a) for a in hs),
            residual=norm / lam,
            area=lam**2 * area,
            volume=lam**3 * vol,
            rho_sigma=rho,
            mean_H=mean_H,
            outlying_a=0.5 * mean_H * rho,
            f_lambda=lam**2 * (area - 4.0 * math.pi) / (2.0 * math.pi),
            iterations=it,
        )


def _damped_step(residual, norm_of, v, dv, norm):
    """Halve the Newton step until the residual decreases (at most 8 halvings)."""
    t = 1.0
    for _ in range(MAX_HALVINGS + 1):
        try:
            r_t, g_t = residual(v + t * dv)
        except GeometryError:
            t *= 0.5
            continue
        n_t = norm_of(r_t)
        if n_t < norm:
            return v + t * dv, r_t, g_t, n_t
        t *= 0.5
    return None


def _min_radius(xi, coeffs, rule, pts):
    """min |z| over the graph: best node, then a local refinement."""
    r = np.linalg.norm(pts, axis=1)
    i = int(np.argmin(r))
    L = rule.degree

    def radius(p):
        th, ph = p
        b = HarmonicBasis.build(L, np.array([th]), np.array([ph]), skip_first=True)
        w = float(coeffs @ b.Y[:, 0])
        y = np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])
        return float(np.linalg.norm(xi + (1.0 + w) * y))

    th0 = float(np.clip(rule.theta[i], 1e-3, math.pi - 1e-3))
    out = minimize(radius, [th0, rule.phi[i]], method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 400})
    return min(float(out.fun), float(r[i]))


def lyapunov_schmidt_solve(metric: MetricSpec, xi, lam, degree=8, n_polar=24, tol=TOLERANCE):
    """Solve once; returns (SphericalGraph, SolveReport)."""
    return LyapunovSchmidtSolver(metric, lam, degree, n_polar, tol=tol).solve(xi)


def f_lambda(metric: MetricSpec, xi, lam, degree=8, n_polar=24):
    """(area - 4 pi lambda^2) / (2 pi) of the solved surface."""
    return lyapunov_schmidt_solve(metric, xi, lam, degree, n_polar)[1].f_lambda


def legendre_height_profile(xi, y, terms=None):
    """-4 sum_{l != 1} |xi|^(-l-1) P_l(-<y, xi>/|xi|) / (l + 2).

    With ``terms=None`` the full series is summed in closed form
    (up to 1e-16); otherwise only degrees l <= terms are kept.
    """
    from ..special_functions import legendre_table

    xi = np.asarray(xi, dtype=float)
    r = np.linalg.norm(xi)
    z = -(np.asarray(y, dtype=float) @ xi) / r
    L = terms if terms is not None else int(math.ceil(37.0 * math.log(10) / math.log(r))) + 1
    P = legendre_table(L, z)
    total = 0.0
    for l in range(L + 1):
        if l == 1:
            continue
        total = total + P[l] * r ** (-l - 1) / (l + 2)
    return -4.0 * total


@dataclass
class CMCResult:
    xi: np.ndarray
    graph: SphericalGraph
    report: SolveReport
    critical_point: CriticalPointReport
    start_report: SolveReport
    calibration: float = float("nan")

    @property
    def multiplier_ratio(self):
        end = self.report.first_multipliers
        return self.start_report.first_multipliers / end if end > 0 else float("inf")


def calibrate_multipliers(degree=8, n_polar=24, lams=(1000.0, 2000.0)):
    """Constant C with |h1| + |h2| + |h3| ~ C lambda^-3, from Schwarzschild at xi = 2 e3."""
    m = MetricSpec()
    xi = np.array([0.0, 0.0, 2.0])
    return max(lam**3 * LyapunovSchmidtSolver(m, lam, degree, n_polar).solve(xi)[1].first_multipliers
               for lam in lams)


def find_cmc(metric: MetricSpec, xi0, lam, degree=8, n_polar=24, step=FIND_STEP, tol=FIND_TOL,
             calibration=None, clamp=1.06, solver=None):
    """Minimize F_lambda over xi from ``xi0`` and solve at the minimizer.

    At the minimizer the first multipliers must satisfy
    |h1| + |h2| + |h3| <= 10 C lambda^-3 with C from :func:`calibrate_multipliers`
    (computed here unless ``calibration`` is given).

    Raises
    ------
    BoundaryError
        If the search runs into |xi| = ``clamp`` or stops somewhere other
        than a strict minimum (no interior minimum).
    SolverFailure
        If the search does not converge or the multiplier bound fails.
    """
    solver = solver or LyapunovSchmidtSolver(metric, lam, degree, n_polar)
    xi0 = np.asarray(xi0, dtype=float)
    _, start = solver.solve(xi0)

    def objective(p):
        return solver.solve(p)[1].f_lambda

    cp = find_critical_point(None, xi0, tol=tol, clamp=clamp, radius=0.1, objective=objective,
                             step=step)
    if not cp.converged:
        raise SolverFailure("F_lambda minimization did not converge", [cp.gradient_norm])
    if cp.classification != "strict-min":
        raise BoundaryError(f"no interior minimum: search stopped at a {cp.classification} point",
                            last_iterate=cp.xi)
    graph, report = solver.solve(cp.xi)
    cal = calibrate_multipliers(degree, n_polar) if calibration is None else float(calibration)
    bound = 10.0 * cal * lam**-3
    if not report.first_multipliers <= bound:
        raise SolverFailure(f"first multipliers {report.first_multipliers:.3e} exceed {bound:.3e}",
                            [cp.gradient_norm, report.first_multipliers])
    return CMCResult(cp.xi, graph, report, cp, start, cal)
