"""
Bump profiles and the strict-local-minimum construction.

A bump

    phi_k(t) = exp(-4 / (k (t0 - t) + 1))   for t < t0 + 1/k,   0 otherwise,

with t0 = sqrt(1 - s0^-2), is concentrated where the unit sphere about s0 e3
is tangent to the cone t = t0.  Subtracting the constant a_k = J_k'(s0) / I'(s0)
makes s0 e3 a critical point of

    Q(xi) = int_{|x - xi| = 1} |x|^-2 psi(x3/|x|) (1 - 3 (x3 - xi3)^2),

psi = amplitude * (phi_k - a_k), and for large k that critical point is a
strict local minimum.  The trace-free tensor built from psi then gives a
reduced functional with an interior strict local minimum.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import ConstructionFailure, DegenerateS0Error, DomainError, InvalidArgumentError
from .quadrature import QuadratureGrid, build_adapted_sphere_rule, build_sphere_grid
from .tensors import AxisymmetricProfile, AxisymmetricTensor

__all__ = [
    "BumpParams",
    "MinimumCertificate",
    "Construction",
    "bump",
    "bump_derivatives",
    "counterexample_grid",
    "counterexample_profile",
    "counterexample_tensor",
    "profile_from_export",
    "export_profile",
    "eval_I",
    "eval_J",
    "compute_a",
    "eval_Q",
    "q_derivatives",
    "certify_minimum",
    "construct",
    "build_metric",
]

DEGENERATE_DERIVATIVE = 1e-6
DIFF_STEP_S = 1e-5
DIFF_STEP_XI = 1e-4
EXPORT_SAMPLES = 2048


@dataclass(frozen=True)
class BumpParams:
    """Parameters of the bump construction.

    ``a_k`` is filled in by :func:`compute_a` (see :meth:`with_a`).
    """

    k: int
    s0: float = 2.0
    amplitude: float = 1.0
    a_k: float | None = None

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise InvalidArgumentError(f"k must be a positive integer, got {self.k!r}")
        if not self.s0 >= 2.0:
            raise InvalidArgumentError(f"s0 must be >= 2, got {self.s0!r}")
        if not self.amplitude > 0.0:
            raise InvalidArgumentError(f"amplitude must be positive, got {self.amplitude!r}")

    @property
    def t0(self):
        return math.sqrt(1.0 - self.s0**-2)

    @property
    def breakpoints(self):
        """t-levels where the bump changes character (the last is its edge)."""
        t0, k = self.t0, self.k
        return (t0 - 1.0 / k, t0, t0 + 0.5 / k, t0 + 1.0 / k)

    def with_a(self, a_k):
        return replace(self, a_k=float(a_k))

    def with_amplitude(self, amplitude):
        return replace(self, amplitude=float(amplitude))


def _bump_parts(t, p):
    t = np.asarray(t, dtype=float)
    w = p.k * (p.t0 - t) + 1.0
    inside = w > 0.0
    # keep w away from 0 where it is masked out anyway
    ws = np.where(inside, w, 1.0)
    e = np.where(inside, np.exp(-4.0 / ws), 0.0)
    return ws, e


def bump(t, p: BumpParams):
    """phi_k(t); vanishes identically for t >= t0 + 1/k."""
    _, e = _bump_parts(t, p)
    return e


def bump_derivatives(t, p: BumpParams):
    """Return (phi_k, phi_k', phi_k'') at ``t``."""
    w, e = _bump_parts(t, p)
    k = p.k
    d1 = -4.0 * k * e / w**2
    d2 = 8.0 * k * k * e * (2.0 - w) / w**4
    return e, d1, d2


def counterexample_grid(k, azimuthal_count=None):
    """Sphere grid with polar resolution scaled to the bump width."""
    n = max(32, 8 * math.ceil(math.sqrt(k)))
    return build_sphere_grid(n, azimuthal_count=azimuthal_count)


def counterexample_profile(p: BumpParams, a_k=None, grid=None):
    """psi = amplitude * (phi_k - a_k) as an axisymmetric profile."""
    if a_k is None:
        a_k = p.a_k if p.a_k is not None else compute_a(p, grid)
    a_k = float(a_k)
    amp = float(p.amplitude)

    def value(t):
        return amp * (bump(t, p) - a_k)

    def d1(t):
        return amp * bump_derivatives(t, p)[1]

    def d2(t):
        return amp * bump_derivatives(t, p)[2]

    meta = {"type": "counterexample", "k": int(p.k), "s0": float(p.s0),
            "amplitude": amp, "a_k": a_k}
    return AxisymmetricProfile(value, d1, d2, meta, p.breakpoints)


def counterexample_tensor(p: BumpParams, a_k=None, grid=None):
    return AxisymmetricTensor(counterexample_profile(p, a_k, grid))


def export_profile(p: BumpParams, a_k=None, samples=EXPORT_SAMPLES):
    """JSON-ready description of psi with a uniform sample table on [-1, 1]."""
    prof = counterexample_profile(p, a_k)
    t = np.linspace(-1.0, 1.0, samples)
    return {
        "k": int(p.k),
        "s0": float(p.s0),
        "t0": p.t0,
        "a_k": prof.metadata["a_k"],
        "amplitude": float(p.amplitude),
        "samples": [[float(a), float(b)] for a, b in zip(t, prof(t))],
    }


def profile_from_export(doc):
    """Rebuild the analytic profile from an export document.

    The sample table is far too coarse to resolve a bump of width 1/k, so the
    analytic formula is used; the table is checked against it.
    """
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    allowed = {"k", "s0", "t0", "a_k", "amplitude", "samples"}
    extra = set(doc) - allowed
    if extra:
        raise InvalidArgumentError(f"unknown keys {sorted(extra)}")
    p = BumpParams(int(doc["k"]), float(doc["s0"]), float(doc["amplitude"]))
    prof = counterexample_profile(p, a_k=float(doc["a_k"]))
    table = np.asarray(doc.get("samples") or [], dtype=float)
    if table.size:
        if table.ndim != 2 or table.shape[1] != 2:
            raise InvalidArgumentError("samples must be [t, psi] pairs")
        scale = max(1.0, float(np.max(np.abs(table[:, 1]))))
        if np.max(np.abs(prof(table[:, 0]) - table[:, 1])) > 1e-9 * scale:
            raise InvalidArgumentError("sample table does not match the stated parameters")
    return prof


# ---------------------------------------------------------------- integrals


def _axis_breaks(s, levels):
    """z-values on the unit sphere about s e3 (s > 1) where x3/|x| hits each level."""
    out = []
    for t in levels:
        if not -1.0 < t < 1.0:
            continue
        disc = 1.0 - s * s * (1.0 - t * t)
        if disc < 0.0:
            continue
        for z in (-s * (1.0 - t * t) + abs(t) * math.sqrt(disc),
                  -s * (1.0 - t * t) - abs(t) * math.sqrt(disc)):
            if -1.0 < z < 1.0 and (s + z) * t >= 0.0:
                out.append(z)
    return out


def _axis_integral(s, weight, grid, levels=()):
    """Integral over the unit sphere about s e3 of |x|^-2 weight(t) (1 - 3 z^2)."""
    if not s > 1.0:
        raise DomainError(f"s must exceed 1, got {s!r}")
    breaks = _axis_breaks(s, levels)
    # |x|^-2 has a near-pole at distance (s - 1)^2 / (2 s) below z = -1;
    # grade panels geometrically toward it
    gap = (s - 1.0) ** 2 / (2.0 * s)
    edge = 4.0 * gap
    while edge < 0.5:
        breaks.append(-1.0 + edge)
        edge *= 4.0
    g = build_sphere_grid(grid.n_polar, breakpoints=breaks,
                          azimuthal_count=grid.azimuthal_count)
    z = g.polar_nodes[:, 0]
    w = g.polar_nodes[:, 1] * 2.0 * math.pi
    r2 = s * s + 2.0 * s * z + 1.0
    t = (s + z) / np.sqrt(r2)
    return float(w @ (weight(t) * (1.0 - 3.0 * z * z) / r2))


def _default_grid(p, grid):
    return counterexample_grid(p.k) if grid is None else grid


def eval_I(s, grid: QuadratureGrid | None = None):
    """I(s) = int_{|x - s e3| = 1} |x|^-2 (1 - 3 (x3 - s)^2)."""
    grid = build_sphere_grid(32) if grid is None else grid
    return _axis_integral(float(s), np.ones_like, grid)


def eval_J(p: BumpParams, s, grid: QuadratureGrid | None = None, weight=None):
    """J_k(s), the I-type moment weighted by phi_k (or by ``weight``)."""
    grid = _default_grid(p, grid)
    fn = (lambda t: bump(t, p)) if weight is None else weight
    return _axis_integral(float(s), fn, grid, p.breakpoints)


def _richardson_first(f, x, h):
    d1 = (f(x + h) - f(x - h)) / (2.0 * h)
    d2 = (f(x + 0.5 * h) - f(x - 0.5 * h)) / h
    return (4.0 * d2 - d1) / 3.0


def compute_a(p: BumpParams, grid: QuadratureGrid | None = None, step=DIFF_STEP_S):
    """a_k = J_k'(s0) / I'(s0) by Richardson-extrapolated central differences.

    Raises
    ------
    DegenerateS0Error
        If |I'(s0)| is below 1e-6.
    """
    grid = _default_grid(p, grid)
    return _compute_a_cached(p.k, p.s0, grid.n_polar, grid.azimuthal_count,
                             tuple(grid.breakpoints), step)


@lru_cache(maxsize=64)
def _compute_a_cached(k, s0, n_polar, azimuthal, breaks, step):
    p = BumpParams(k, s0)
    grid = build_sphere_grid(n_polar, breakpoints=breaks, azimuthal_count=azimuthal)
    di = _richardson_first(lambda s: eval_I(s, grid), s0, step)
    if abs(di) < DEGENERATE_DERIVATIVE:
        raise DegenerateS0Error(
            f"I'(s0) = {di:.3e} is numerically zero; choose another s0",
            diagnostics={"s0": s0, "dI": di},
        )
    dj = _richardson_first(lambda s: eval_J(p, s, grid), s0, step)
    return dj / di


def _resolved(p, grid):
    return p if p.a_k is not None else p.with_a(compute_a(p, grid))


def eval_Q(p: BumpParams, xi, grid: QuadratureGrid | None = None):
    """Q(xi) with psi = amplitude * (phi_k - a_k) on the unit sphere about xi."""
    xi = np.asarray(xi, dtype=float)
    if not np.linalg.norm(xi) > 1.0:
        raise DomainError("Q is defined for |xi| > 1")
    grid = _default_grid(p, grid)
    p = _resolved(p, grid)
    rule = build_adapted_sphere_rule(xi, p.breakpoints, grid.n_polar, grid.azimuthal_count)
    x = xi + rule.points
    r2 = np.einsum("ij,ij->i", x, x)
    t = x[:, 2] / np.sqrt(r2)
    psi = p.amplitude * (bump(t, p) - p.a_k)
    nu3 = rule.points[:, 2]
    return float(rule.weights @ (psi * (1.0 - 3.0 * nu3 * nu3) / r2))


def q_derivatives(p: BumpParams, xi, grid=None, step=DIFF_STEP_XI):
    """Central-difference gradient and Hessian of Q at ``xi``."""
    grid = _default_grid(p, grid)
    p = _resolved(p, grid)
    xi = np.asarray(xi, dtype=float)
    eye = np.eye(3)
    f0 = eval_Q(p, xi, grid)
    plus = [eval_Q(p, xi + step * e, grid) for e in eye]
    minus = [eval_Q(p, xi - step * e, grid) for e in eye]
    grad = np.array([(a - b) / (2.0 * step) for a, b in zip(plus, minus)])
    hess = np.empty((3, 3))
    for i in range(3):
        hess[i, i] = (plus[i] - 2.0 * f0 + minus[i]) / step**2
        for j in range(i + 1, 3):
            pp = eval_Q(p, xi + step * (eye[i] + eye[j]), grid)
            pm = eval_Q(p, xi + step * (eye[i] - eye[j]), grid)
            mp = eval_Q(p, xi - step * (eye[i] - eye[j]), grid)
            mm = eval_Q(p, xi - step * (eye[i] + eye[j]), grid)
            hess[i, j] = hess[j, i] = (pp - pm - mp + mm) / (4.0 * step**2)
    return grad, hess


@dataclass(frozen=True)
class MinimumCertificate:
    """Outcome of the strict-local-minimum test for Q at s0 e3."""

    xi: np.ndarray
    gradient_norm: float
    hessian_eigenvalues: np.ndarray
    k_used: int
    axis_eigenvalue_pair_gap: float
    a_k: float
    hessian: np.ndarray = field(repr=False, default=None)

    @property
    def valid(self):
        return bool(np.all(self.hessian_eigenvalues > 0.0))


def certify_minimum(p: BumpParams, grid: QuadratureGrid | None = None, grad_tol=1e-5,
                    eig_tol=1e-6, max_doublings=4):
    """Certify a strict local minimum of Q at s0 e3, doubling k on failure.

    Grids are rebuilt for each k unless ``grid`` is given.
    """
    history = []
    k = p.k
    for _ in range(max_doublings + 1):
        q = replace(p, k=k, a_k=None)
        g = counterexample_grid(k) if grid is None else grid
        q = q.with_a(compute_a(q, g))
        xi = np.array([0.0, 0.0, q.s0])
        grad, hess = q_derivatives(q, xi, g)
        eig = np.linalg.eigvalsh(hess)
        # eigenvalues of the two transverse directions (x1, x2)
        pair = np.array([hess[0, 0], hess[1, 1]])
        gap = abs(pair[0] - pair[1]) / max(abs(pair).max(), 1e-300)
        gnorm = float(np.linalg.norm(grad))
        history.append({"k": k, "gradient_norm": gnorm, "eigenvalues": eig.tolist()})
        if gnorm <= grad_tol and eig.min() >= eig_tol:
            return MinimumCertificate(xi, gnorm, eig, k, gap, q.a_k, hess)
        k *= 2
    raise ConstructionFailure("no k up to 16 k0 gives a certified minimum",
                              diagnostics={"history": history})


# ------------------------------------------------------------ metric assembly


@dataclass
class Construction:
    """Everything produced while assembling the counterexample metric."""

    params: BumpParams
    certificate: MinimumCertificate
    tensor: AxisymmetricTensor
    critical_point: object
    amplitude_trials: list
    metric: object = None


def construct(p: BumpParams, grid=None, amplitude_start=64.0, amplitude_cap=2.0**20,
              certificate=None):
    """Certify Q, then double the amplitude until F has a strict minimum near s0 e3."""
    from .cmc.metric import MetricSpec
    from .errors import BoundaryError
    from .functional import FunctionalContext, find_critical_point

    cert = certificate or certify_minimum(p, grid)
    g = counterexample_grid(cert.k_used) if grid is None else grid
    base = replace(p, k=cert.k_used, a_k=cert.a_k)
    trials = []
    amp = float(amplitude_start)
    while amp <= amplitude_cap:
        q = base.with_amplitude(amp)
        tensor = counterexample_tensor(q)
        ctx = FunctionalContext(tensor, g)
        try:
            report = find_critical_point(ctx, np.array([0.0, 0.0, q.s0]))
            status = report.classification
        except BoundaryError:
            report, status = None, "boundary"
        trials.append({"amplitude": amp, "status": status})
        if report is not None and status == "strict-min" and report.converged:
            c = Construction(q, cert, tensor, report, trials)
            c.metric = MetricSpec(tensor)
            return c
        amp *= 2.0
    raise ConstructionFailure("amplitude search did not produce a strict minimum of F",
                              diagnostics={"trials": trials})


def build_metric(p: BumpParams, grid=None, **kwargs):
    """MetricSpec of the counterexample (see :func:`construct`)."""
    return construct(p, grid, **kwargs).metric
