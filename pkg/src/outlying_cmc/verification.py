"""
Verification suites shared by the command line and the test-suite.

Each suite returns a :class:`SuiteResult`, a list of named checks with the
measured value and the threshold it was held to.  Work that is independent
across sample points is sharded over a thread pool; results are collected
in submission order so output never depends on the thread count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cmc.metric import MetricSpec
from .cmc.solver import LyapunovSchmidtSolver, legendre_height_profile
from .counterexample import BumpParams, compute_a, counterexample_grid, counterexample_tensor
from .errors import BoundaryError
from .functional import (
    FunctionalContext,
    eval_K,
    eval_K_divergence,
    find_critical_point,
    flux_residual,
    phi_lower_bound,
    radial_derivative_F,
    schwarzschild_part,
)
from .quadrature import build_sphere_grid, integrate_ball_homogeneous, integrate_sphere
from .special_functions import (
    SeriesKind,
    default_series_terms,
    generating_residual,
    series_closed_form,
    series_truncated,
)
from .tensors import IsotropicTensor, ZeroTensor, scalar_density

__all__ = [
    "Check",
    "SuiteResult",
    "thread_count",
    "sphere_inverse_square",
    "ball_inverse_square",
    "identity_suite",
    "positivity_suite",
    "flux_suite",
    "cmc_scaling_suite",
    "mechanism_suite",
    "SUITES",
    "CHECK_COLUMNS",
]

CHECK_COLUMNS = ("suite", "name", "value", "threshold", "passed")
THREADS_ENV = "OUTLYING_CMC_THREADS"


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    passed: bool


@dataclass
class SuiteResult:
    suite: str
    checks: list = field(default_factory=list)

    def add(self, name, value, threshold, passed=None):
        value, threshold = float(value), float(threshold)
        if passed is None:
            passed = value <= threshold
        self.checks.append(Check(name, value, threshold, bool(passed)))

    @property
    def passed(self):
        return bool(self.checks) and all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def rows(self):
        return [{"suite": self.suite, "name": c.name, "value": c.value,
                 "threshold": c.threshold, "passed": int(c.passed)} for c in self.checks]


def thread_count(default=None):
    """Worker count from OUTLYING_CMC_THREADS, else ``default`` or the CPU count."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            n = 0
        if n >= 1:
            return n
    return default or min(8, os.cpu_count() or 1)


def ordered_map(fn, items, threads=None):
    items = list(items)
    n = thread_count(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def sphere_inverse_square(r):
    """Integral of |x|^-2 over the unit sphere about a center at distance r > 1."""
    return 2.0 * math.pi / r * math.log((r + 1.0) / (r - 1.0))


def ball_inverse_square(r):
    """Integral of |x|^-2 over the unit ball about a center at distance r > 1."""
    return 2.0 * math.pi * (1.0 - (r * r - 1.0) / (2.0 * r) * math.log((r + 1.0) / (r - 1.0)))


def _directions(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


# ----------------------------------------------------------------- suites


def identity_suite(tol=1e-8, series_tol=1e-10, radii=(1.5, 2.0, 5.0), n_polar=48, seed=0):
    """Series closed forms, |x|^-2 sphere and ball integrals, generating residual decay."""
    out = SuiteResult("identities")
    for r in radii:
        for kind in SeriesKind:
            err = abs(series_closed_form(kind, r) - series_truncated(kind, r, default_series_terms(r)))
            out.add(f"series_{kind.value}_r={r:g}", err, series_tol)

    rng = np.random.default_rng(seed)
    dirs = np.vstack([[0.0, 0.0, 1.0], _directions(rng, 2)])
    grid = build_sphere_grid(n_polar)
    inv_sq = lambda x: 1.0 / np.einsum("ij,ij->i", x, x)
    ones = lambda w: np.ones(len(w))
    for r in radii:
        es, eb = sphere_inverse_square(r), ball_inverse_square(r)
        ds = max(abs(integrate_sphere(inv_sq, r * d, grid) - es) for d in dirs)
        db = max(abs(integrate_ball_homogeneous(ones, r * d, -2, (), n_polar, n_polar) - eb)
                 for d in dirs)
        out.add(f"sphere_inverse_square_r={r:g}", ds, tol)
        out.add(f"ball_inverse_square_r={r:g}", db, tol)

    # residual after degree L behaves like r^-L: fit the log-slope
    ys = _directions(rng, 16)
    for r in radii:
        xi = np.array([0.0, 0.0, r])
        L_max = int(math.ceil(11.0 * math.log(10.0) / math.log(r)))
        Ls = np.arange(2, L_max + 1)
        for which in (0, 1):
            errs = np.array([max(generating_residual(xi, y, int(L))[which] for y in ys) for L in Ls])
            slope = np.polyfit(Ls, np.log(errs), 1)[0]
            rel = abs(slope / -math.log(r) - 1.0)
            out.add(f"generating_decay_{which + 1}_r={r:g}", rel, 0.1)
    return out


def positivity_suite(samples=400, r_min=1.01, r_max=100.0, bound_range=(10.0, 160.0)):
    """Phi > 0 on a geometric grid, and r^4 Phi bounded on a far range."""
    out = SuiteResult("positivity")
    rs = np.geomspace(r_min, r_max, samples)
    phi = np.array([phi_lower_bound(r) for r in rs])
    out.add("phi_min_positive", phi.min(), 0.0, bool(np.all(phi > 0.0)))
    far = np.geomspace(*bound_range, 200)
    scaled = np.array([phi_lower_bound(r) * r**4 for r in far])
    # bounded: finite and no larger than at the near end of the range
    out.add("phi_r4_max", scaled.max(), scaled[0],
            bool(np.all(np.isfinite(scaled)) and scaled.max() <= scaled[0] * (1.0 + 1e-12)))
    return out


def flux_context(k=200, s0=2.0, amplitude=1.0, n_polar=32, azimuthal_count=1024):
    """Counterexample tensor with a quadrature fine enough for the flux checks."""
    p = BumpParams(k, s0, amplitude)
    p = p.with_a(compute_a(p, counterexample_grid(k)))
    grid = build_sphere_grid(n_polar, azimuthal_count=azimuthal_count)
    return FunctionalContext(counterexample_tensor(p), grid)


def flux_suite(tol=1e-6, rel_tol=1e-7, k=200, s_values=(1.0, 1.5, 2.0, 3.0, 5.0), ctx=None):
    """s G'(s) = G(s) + K(s) and the two routes to K, along two directions."""
    ctx = ctx or flux_context(k)
    out = SuiteResult("flux")
    directions = {"axis": np.array([0.0, 0.0, 2.0]),
                  "oblique": 2.0 * np.array([math.sin(math.pi / 4), 0.0, math.cos(math.pi / 4)])}
    jobs = [(name, xi, s) for name, xi in directions.items() for s in s_values]

    def one(job):
        _, xi, s = job
        res = flux_residual(ctx, xi, s)
        k1, k2 = eval_K(ctx, xi, s), eval_K_divergence(ctx, xi, s)
        rel = abs(k1 - k2) / max(abs(k1), abs(k2), 1e-300)
        return res, rel

    for (name, _, s), (res, rel) in zip(jobs, ordered_map(one, jobs)):
        out.add(f"flux_{name}_s={s:g}", res, tol)
        out.add(f"k_routes_{name}_s={s:g}", rel, rel_tol)
    return out


def cmc_scaling_suite(lams=(100.0, 300.0, 1000.0, 3000.0), degree=8, n_polar=24,
                      profile_tol=5e-2, drop=6.0, volume_tol=1e-10, halving_slack=0.05):
    """Convergence of the Lyapunov-Schmidt solutions about xi = 2 e3 in Schwarzschild."""
    out = SuiteResult("cmc-scaling")
    xi = np.array([0.0, 0.0, 2.0])
    m = MetricSpec()
    S2 = schwarzschild_part(2.0)
    every = sorted(set(lams) | {1000.0, 2000.0})

    def one(lam):
        solver = LyapunovSchmidtSolver(m, lam, degree, n_polar)
        graph, rep = solver.solve(xi)
        rule, _ = solver.rule(xi)
        u = graph.height(rule)
        # the discretization carries degrees <= L, so compare with that truncation
        prof = legendre_height_profile(xi, rule.points, terms=degree)
        return rep, float(np.max(np.abs(u - prof)))

    results = dict(zip(every, ordered_map(one, every)))
    gaps = [abs(results[lam][0].f_lambda - S2) for lam in lams]
    ok = all(b < a for a, b in zip(gaps, gaps[1:]))
    out.add("f_lambda_gap_monotone", gaps[-1], gaps[0], ok)
    for lam, g in zip(lams, gaps):
        out.add(f"f_lambda_gap_lambda={lam:g}", g, float("inf"), True)

    h1 = max(abs(v) for v in results[1000.0][0].h)
    h2 = max(abs(v) for v in results[2000.0][0].h)
    ratio = h1 / h2 if h2 > 0 else float("inf")
    out.add("multiplier_drop_on_doubling", ratio, drop, ratio >= drop)

    e1, e2 = results[1000.0][1], results[2000.0][1]
    out.add("height_profile_lambda=1000", e1, profile_tol)
    out.add("height_profile_halving", e2 / e1, 0.5 * (1.0 + halving_slack))

    for lam in every:
        rep = results[lam][0]
        target = 4.0 * math.pi * lam**3 / 3.0
        out.add(f"volume_lambda={lam:g}", abs(rep.volume - target) / target, volume_tol)
    return out


def mechanism_suite(tensors=None, samples=20, r_range=(1.2, 10.0), margin=1e-5, seed=0,
                    starts=((0.0, 0.0, 3.0), (2.0, 1.0, 1.0), (-0.5, 1.5, -3.0))):
    """With a nonnegative density, dF/dr >= Phi and F has no interior critical point."""
    if tensors is None:
        tensors = {"zero": ZeroTensor(), "isotropic": IsotropicTensor(-0.1)}
    out = SuiteResult("mechanism")
    rng = np.random.default_rng(seed)
    centers = _directions(rng, samples) * np.geomspace(*r_range, samples)[:, None]
    for name, T in tensors.items():
        ctx = FunctionalContext(T)
        nodes = np.concatenate([c + np.asarray(ctx.sphere_grid.points) for c in centers])
        dens = float(np.min(scalar_density(T, nodes)))
        out.add(f"{name}_density_min", dens, 0.0, dens >= 0.0)

        def gap(c):
            return float(radial_derivative_F(ctx, c)) - phi_lower_bound(np.linalg.norm(c))

        worst = min(ordered_map(gap, centers))
        out.add(f"{name}_radial_minus_phi_min", worst, -margin, worst >= -margin)
        for i, x0 in enumerate(starts):
            try:
                rep = find_critical_point(ctx, np.asarray(x0, dtype=float))
                ok = not rep.converged
            except BoundaryError:
                ok = True
            out.add(f"{name}_no_interior_critical_point_{i}", 0.0 if ok else 1.0, 0.0, ok)
    return out


SUITES = {
    "identities": identity_suite,
    "positivity": positivity_suite,
    "flux": flux_suite,
    "cmc-scaling": cmc_scaling_suite,
}
