from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from outlying_cmc.cmc import (
    HarmonicBasis,
    LyapunovSchmidtSolver,
    MetricSpec,
    SphericalGraph,
    graph_geometry,
    harmonic_indices,
    legendre_height_profile,
    lyapunov_schmidt_solve,
    metric_eval,
    surface_rule,
)
from outlying_cmc.counterexample import BumpParams, counterexample_tensor
from outlying_cmc.errors import (
    DomainError,
    GeometryError,
    InvalidArgumentError,
    MetricDegenerateError,
)
from outlying_cmc.functional import phi_lower_bound, schwarzschild_part
from outlying_cmc.special_functions import legendre_table
from outlying_cmc.tensors import AxisymmetricTensor, IsotropicTensor, constant_profile

XI = np.array([0.0, 0.0, 2.0])
SCHW = MetricSpec()


# ------------------------------------------------------------ metric


def test_metric_examples():
    g, dg = metric_eval(SCHW, np.array([0.0, 0.0, 1.0 + 1e-12]))
    np.testing.assert_allclose(g, 16 * np.eye(3), rtol=1e-10)
    g, _ = metric_eval(SCHW, np.array([1e4, 0.0, 0.0]))
    assert np.linalg.norm(g - np.eye(3)) <= 5e-4 * math.sqrt(3)
    with pytest.raises(DomainError):
        metric_eval(SCHW, np.array([0.5, 0.0, 0.0]))


@settings(max_examples=25, deadline=None)
@given(st.floats(2.0, 100.0), st.integers(0, 2**31))
def test_metric_derivative_against_differences(r, seed):
    d = np.random.default_rng(seed).standard_normal(3)
    x = r * d / np.linalg.norm(d)
    m = MetricSpec(counterexample_tensor(BumpParams(20, 2.0, 0.05, a_k=-0.01)))
    g, dg = metric_eval(m, x)
    np.testing.assert_array_equal(g, np.swapaxes(g, -1, -2))
    h = 1e-5 * r
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        a = (metric_eval(m, x + e)[0] - metric_eval(m, x - e)[0]) / (2 * h)
        b = (metric_eval(m, x + e / 2)[0] - metric_eval(m, x - e / 2)[0]) / h
        fd = (4 * b - a) / 3
        scale = np.abs(dg).max()
        assert np.abs(fd - dg[..., k]).max() <= 1e-7 * scale


def test_metric_degenerate_is_reported():
    m = MetricSpec(IsotropicTensor(-30.0))
    with pytest.raises(MetricDegenerateError):
        metric_eval(m, np.array([0.0, 0.0, 2.0]))


# ------------------------------------------------------------ harmonics


def test_harmonics_orthonormal_on_surface_rule():
    rule = surface_rule(XI, 8, 24)
    full = HarmonicBasis.build(8, rule.theta, rule.phi)
    gram = (full.Y * rule.weights) @ full.Y.T
    np.testing.assert_allclose(gram, np.eye(len(full.indices)), atol=1e-13)
    assert all(l != 1 for l, _ in rule.basis.indices)
    assert len(harmonic_indices(8, skip_first=True)) == 81 - 3


def test_harmonic_derivatives_against_differences():
    th = np.array([0.3, 1.1, 2.5])
    ph = np.array([-2.0, 0.4, 1.7])
    B = HarmonicBasis.build(5, th, ph)
    h = 1e-5
    Bt = HarmonicBasis.build(5, th + h, ph)
    Bm = HarmonicBasis.build(5, th - h, ph)
    np.testing.assert_allclose((Bt.Y - Bm.Y) / (2 * h), B.Y_t, atol=1e-8)
    np.testing.assert_allclose((Bt.Y_t - Bm.Y_t) / (2 * h), B.Y_tt, atol=1e-7)
    Bp = HarmonicBasis.build(5, th, ph + h)
    Bq = HarmonicBasis.build(5, th, ph - h)
    np.testing.assert_allclose((Bp.Y - Bq.Y) / (2 * h), B.Y_p, atol=1e-8)
    np.testing.assert_allclose((Bp.Y_t - Bq.Y_t) / (2 * h), B.Y_tp, atol=1e-7)
    np.testing.assert_allclose((Bp.Y_p - Bq.Y_p) / (2 * h), B.Y_pp, atol=1e-7)


# ------------------------------------------------------------ geometry


def test_flat_round_sphere():
    flat = MetricSpec(flat=True)
    for lam in (10.0, 50.0, 1e3):
        xi = np.array([0.3, -1.2, 1.5])
        g = graph_geometry(flat, SphericalGraph(xi, lam, 6), surface_rule(xi, 6, 16))
        assert g.area == pytest.approx(4 * math.pi * lam**2, rel=1e-13)
        assert g.volume == pytest.approx(4 * math.pi * lam**3 / 3, rel=1e-13)
        np.testing.assert_allclose(g.H, 2.0 / lam, rtol=1e-12)


def test_flat_solve_is_immediate():
    graph, rep = LyapunovSchmidtSolver(MetricSpec(flat=True), 10.0, 6, 16).solve(
        np.array([0.0, 1.5, 1.0]))
    assert rep.iterations == 0
    assert np.all(graph.coefficients == 0) and all(v == 0 for v in rep.h)


def coordinate_sphere(lam):
    rule = surface_rule(XI, 8, 24)
    return rule, graph_geometry(SCHW, SphericalGraph(XI, lam, 8), rule)


def test_schwarzschild_area_and_volume_expansions():
    r = 2.0
    L = math.log((r + 1) / (r - 1))
    lam = 1e3
    _, g = coordinate_sphere(lam)
    area = 4 * math.pi * lam**2 + 16 * math.pi * lam / r + 12 * math.pi / r * L
    vol = 4 * math.pi / 3 * lam**3 * (1 + 6 / (lam * r)) + 30 * math.pi * lam * (
        1 - (r * r - 1) / (2 * r) * L)
    assert g.area == pytest.approx(area, rel=1e-5)
    assert g.volume == pytest.approx(vol, rel=1e-6)


def test_coordinate_sphere_mean_curvature_expansion():
    errs = []
    for lam in (1e3, 2e3):
        rule, g = coordinate_sphere(lam)
        z = -(rule.points @ XI) / 2.0
        P = legendre_table(40, z)
        series = 4 / lam**2 * sum((l - 1) * 2.0 ** (-l - 1) * P[l] for l in range(41))
        errs.append(np.abs(g.H - 2 / lam - series).max())
    # lambda^-3 rate: halving lambda's inverse cuts the error by ~8
    assert 6.0 <= errs[0] / errs[1] <= 10.0
    assert errs[0] <= 10.0 * 1e3**-3


def test_graph_invariants():
    with pytest.raises(InvalidArgumentError):
        SphericalGraph(XI, 10.0, 4, np.zeros(5))
    with pytest.raises(InvalidArgumentError):
        SphericalGraph(np.array([0.0, 0.0, 0.5]), 10.0, 4)
    rule = surface_rule(XI, 4, 12)
    c = np.zeros(len(harmonic_indices(4, skip_first=True)))
    c[0] = 1.0  # constant harmonic pushes |w| past the graph regime
    with pytest.raises(GeometryError):
        graph_geometry(SCHW, SphericalGraph(XI, 1e3, 4, c), rule)


# ------------------------------------------------------------ solver


@pytest.fixture(scope="module")
def solved():
    return {lam: lyapunov_schmidt_solve(SCHW, XI, lam) for lam in (1e3, 2e3)}


def test_solve_constraints(solved):
    for lam, (_, rep) in solved.items():
        assert abs(rep.volume - 4 * math.pi * lam**3 / 3) <= 1e-10 * 4 * math.pi * lam**3 / 3
        assert rep.residual <= 1e-10 / lam
        assert rep.rho_sigma > 0 and rep.mean_H > 0


def test_mean_height(solved):
    graph, _ = solved[1e3]
    rule = surface_rule(XI, 8, 24)
    mean = rule.weights @ graph.height(rule) / (4 * math.pi)
    assert mean == pytest.approx(-2.0 / 2.0, abs=2e-2)


def test_height_profile(solved):
    rule = surface_rule(XI, 8, 24)
    errs = [np.abs(solved[lam][0].height(rule) - legendre_height_profile(XI, rule.points, 8)).max()
            for lam in (1e3, 2e3)]
    assert errs[0] <= 5e-2
    assert errs[1] <= 0.5 * 1.05 * errs[0]
    # degrees l >= 9 contribute at most 4 sum 2^(-l-1) / 11 = 4 * 2^-9 / 11
    tail = np.abs(legendre_height_profile(XI, rule.points)
                  - legendre_height_profile(XI, rule.points, 8)).max()
    assert tail <= 4 * 2.0**-9 / 11


def test_multipliers_scale_like_lambda_cubed(solved):
    h1 = max(abs(v) for v in solved[1e3][1].h)
    h2 = max(abs(v) for v in solved[2e3][1].h)
    assert h1 / h2 >= 6.0


def test_f_lambda_approaches_reduced_functional():
    gaps = [abs(LyapunovSchmidtSolver(SCHW, lam).solve(XI)[1].f_lambda - schwarzschild_part(2.0))
            for lam in (1e2, 1e3, 1e4)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_first_variation_of_area():
    lam, d = 1e3, 1.0
    reps = [lyapunov_schmidt_solve(SCHW, XI, v)[1] for v in (lam - d, lam, lam + d)]
    dA = (reps[2].area - reps[0].area) / (2 * d)
    dV = 4 * math.pi * lam**2
    assert dA == pytest.approx(reps[1].mean_H * dV, rel=1e-2)


def test_xi_derivatives_uniform_in_lambda():
    target = 2 * math.pi * phi_lower_bound(2.0) / 2.0
    firsts, seconds = [], []
    for lam in (1e2, 1e3, 1e4):
        s = LyapunovSchmidtSolver(SCHW, lam)
        f = lambda z: 2 * math.pi * s.solve(np.array([0.0, 0.0, z]))[1].f_lambda
        h = 1e-2
        fp, f0, fm = f(2 + h), f(2.0), f(2 - h)
        firsts.append((fp - fm) / (2 * h))
        seconds.append((fp - 2 * f0 + fm) / h**2)
    assert max(abs(v - target) for v in firsts) <= 0.1 * target
    assert max(abs(v) for v in seconds) <= 1.0


def test_solver_argument_checks():
    with pytest.raises(InvalidArgumentError):
        LyapunovSchmidtSolver(SCHW, 50.0)
    with pytest.raises(InvalidArgumentError):
        LyapunovSchmidtSolver(SCHW, 1e3, degree=3)
    with pytest.raises(DomainError):
        LyapunovSchmidtSolver(SCHW, 1e3).solve(np.array([0.0, 0.0, 1.04]))


def test_trace_free_perturbation_solves():
    m = MetricSpec(AxisymmetricTensor(constant_profile(0.05)))
    _, rep = lyapunov_schmidt_solve(m, XI, 1e3)
    assert abs(rep.volume / (4 * math.pi * 1e9 / 3) - 1) <= 1e-10


def test_report_json_round_trip(solved):
    import json
    rep = solved[1e3][1]
    doc = json.loads(rep.to_json())
    assert list(doc) == sorted(doc)
    assert doc["lambda"] == 1000.0 and len(doc["h"]) == 4
    assert doc["volume"] == rep.volume
