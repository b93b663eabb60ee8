from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from outlying_cmc.counterexample import (
    BumpParams,
    bump,
    bump_derivatives,
    certify_minimum,
    compute_a,
    construct,
    counterexample_grid,
    counterexample_tensor,
    eval_I,
    eval_J,
    eval_Q,
    export_profile,
    profile_from_export,
    q_derivatives,
)
from outlying_cmc.errors import DegenerateS0Error, DomainError, InvalidArgumentError
from outlying_cmc.quadrature import build_sphere_grid
from outlying_cmc.tensors import scalar_density, trace_ambient

A_K200 = -0.08039745841893713


def I_closed(s):
    # 2 pi int_{-1}^{1} (1 - 3 z^2) / (s^2 + 2 s z + 1) dz
    a, b = s * s + 1.0, 2.0 * s
    L = math.log((a + b) / (a - b))
    # moments of 1 and z^2 against 1 / (a + b z) on [-1, 1]
    m0 = L / b
    m2 = -2.0 * a / b**2 + a * a / b**3 * L
    return 2.0 * math.pi * (m0 - 3.0 * m2)


# --------------------------------------------------------------- bump


def test_bump_examples():
    p = BumpParams(50, 2.0)
    assert bump(p.t0, p) == pytest.approx(math.exp(-4.0), rel=1e-15)
    assert bump(p.t0 + 1.0 / p.k, p) == 0.0
    assert bump(p.t0 - 100.0 / p.k, p) >= math.exp(-4.0 / 101.0) - 1e-16
    assert bump(1.0, p) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.floats(-1.0, 1.0), st.integers(1, 1000))
def test_bump_bounded(t, k):
    v = float(bump(t, BumpParams(k, 2.0)))
    assert 0.0 <= v <= 1.0


def test_bump_derivatives_against_differences():
    p = BumpParams(50, 2.0)
    t = np.linspace(p.t0 - 0.5, p.t0 + 0.9 / p.k, 31)
    _, d1, d2 = bump_derivatives(t, p)
    h = 1e-6
    np.testing.assert_allclose((bump(t + h, p) - bump(t - h, p)) / (2 * h), d1, rtol=1e-6, atol=1e-6)
    h = 1e-4
    fd2 = (bump(t + h, p) - 2 * bump(t, p) + bump(t - h, p)) / h**2
    np.testing.assert_allclose(fd2, d2, rtol=1e-4, atol=1e-4 * np.abs(d2).max())


def test_bump_smooth_at_edge():
    p = BumpParams(200, 2.0)
    edge = p.t0 + 1.0 / p.k
    h = 1e-5
    second = lambda t: (bump(t + h, p) - 2 * bump(t, p) + bump(t - h, p)) / h**2
    jump = abs(second(edge + 3 * h) - second(edge - 3 * h))
    assert jump <= 1e-6


def test_bump_params_validation():
    with pytest.raises(InvalidArgumentError):
        BumpParams(0)
    with pytest.raises(InvalidArgumentError):
        BumpParams(10, 1.5)
    with pytest.raises(InvalidArgumentError):
        BumpParams(10, 2.0, -1.0)
    assert BumpParams(10, 2.0).t0 == pytest.approx(math.sqrt(0.75))


# --------------------------------------------------------------- I and J


def test_I_at_two():
    closed = 2 * math.pi * (15 / 8 - 59 / 32 * math.log(3))
    assert eval_I(2.0) == pytest.approx(closed, abs=1e-12)
    assert closed == pytest.approx(-0.9460366, abs=1e-7)
    assert I_closed(2.0) == pytest.approx(closed, rel=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.01, 50.0))
def test_I_matches_closed_form(s):
    assert eval_I(s) == pytest.approx(I_closed(s), rel=1e-12, abs=1e-13)


def test_I_decay_and_azimuthal_independence():
    vals = [abs(eval_I(s)) * s * s for s in (10.0, 20.0, 40.0)]
    assert vals[0] > vals[1] > vals[2]
    a = eval_I(2.0, build_sphere_grid(32, azimuthal_count=64))
    b = eval_I(2.0, build_sphere_grid(32, azimuthal_count=1024))
    assert a == pytest.approx(b, abs=1e-14)
    with pytest.raises(DomainError):
        eval_I(1.0)


def test_J_bounds_and_reductions():
    p = BumpParams(50, 2.0)
    J = eval_J(p, 2.0)
    assert math.isfinite(J) and abs(J) <= 12 * math.pi
    assert eval_J(p, 2.0, weight=np.zeros_like) == 0.0
    assert eval_J(p, 2.0, weight=np.ones_like) == pytest.approx(eval_I(2.0), abs=1e-13)
    with pytest.raises(DomainError):
        eval_J(p, 0.9)


# --------------------------------------------------------------- a_k


def test_a_is_step_robust():
    p = BumpParams(50, 2.0)
    g = counterexample_grid(50)
    a = compute_a(p, g)
    b = compute_a(p, g, step=5e-6)
    assert b == pytest.approx(a, rel=1e-6)


def test_a_over_k_bounded_and_decreasing():
    ratios = [abs(compute_a(BumpParams(k, 2.0))) / k for k in (25, 50, 100, 200)]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert max(ratios) < 1e-2


def test_a_for_reference_parameters():
    assert compute_a(BumpParams(200, 2.0)) == pytest.approx(A_K200, rel=1e-9)


def test_degenerate_s0_is_reported(monkeypatch):
    import outlying_cmc.counterexample as cx
    dI = (eval_I(2.0 + 1e-5) - eval_I(2.0 - 1e-5)) / 2e-5
    assert abs(dI) > 1e-6
    # a threshold above |I'(2)| must trip the guard
    monkeypatch.setattr(cx, "DEGENERATE_DERIVATIVE", 2 * abs(dI))
    cx._compute_a_cached.cache_clear()
    with pytest.raises(DegenerateS0Error):
        compute_a(BumpParams(20, 2.0), build_sphere_grid(32))
    cx._compute_a_cached.cache_clear()


# --------------------------------------------------------------- Q


def test_Q_on_axis_reduces_to_moments():
    p = BumpParams(200, 2.0, 3.0, a_k=A_K200)
    for s in np.linspace(1.2, 4.0, 8):
        q = eval_Q(p, np.array([0.0, 0.0, s]))
        want = 3.0 * (eval_J(p, s) - A_K200 * eval_I(s, counterexample_grid(200)))
        assert q == pytest.approx(want, abs=1e-10)


def test_Q_critical_on_axis():
    p = BumpParams(200, 2.0, a_k=A_K200)
    h = 1e-4
    f = lambda s: eval_Q(p, np.array([0.0, 0.0, s]))
    assert abs((f(2 + h) - f(2 - h)) / (2 * h)) <= 1e-6


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 2 * math.pi))
def test_Q_axisymmetric(angle):
    p = BumpParams(100, 2.0, a_k=compute_a(BumpParams(100, 2.0)))
    xi = np.array([0.3, 0.0, 1.9])
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([c * xi[0], s * xi[0], xi[2]])
    assert eval_Q(p, rot) == pytest.approx(eval_Q(p, xi), abs=1e-12)


def test_Q_domain():
    with pytest.raises(DomainError):
        eval_Q(BumpParams(20, 2.0, a_k=0.0), np.array([0.0, 0.0, 1.0]))


# --------------------------------------------------------------- certification


@pytest.fixture(scope="module")
def cert200():
    return certify_minimum(BumpParams(200, 2.0))


def test_certificate_at_reference_k(cert200):
    c = cert200
    assert c.valid and c.k_used == 200
    assert c.gradient_norm <= 1e-5
    assert np.all(c.hessian_eigenvalues >= 1e-6)
    assert c.axis_eigenvalue_pair_gap <= 1e-6
    H = c.hessian
    off = np.abs(H - np.diag(np.diag(H))).max()
    assert off <= 1e-6 * np.linalg.norm(H)


def test_hessian_scales_with_amplitude(cert200):
    p = BumpParams(200, 2.0, 5.0, a_k=cert200.a_k)
    _, H = q_derivatives(p, np.array([0.0, 0.0, 2.0]))
    np.testing.assert_allclose(np.linalg.eigvalsh(H), 5.0 * cert200.hessian_eigenvalues, rtol=1e-6)


def test_smallest_eigenvalue_grows_with_k():
    mins = []
    for k in (50, 100, 200):
        p = BumpParams(k, 2.0)
        g = counterexample_grid(k)
        _, H = q_derivatives(p.with_a(compute_a(p, g)), np.array([0.0, 0.0, 2.0]), g)
        mins.append(np.linalg.eigvalsh(H).min())
    assert all(b >= 1.8 * a for a, b in zip(mins, mins[1:]))


def test_certification_doubles_k_when_needed():
    c = certify_minimum(BumpParams(1, 2.0))
    assert c.valid and c.k_used > 1


# --------------------------------------------------------------- construction


@pytest.fixture(scope="module")
def construction(cert200):
    return construct(BumpParams(200, 2.0), certificate=cert200)


def test_construction_gives_strict_minimum(construction):
    c = construction
    rep = c.critical_point
    assert rep.classification == "strict-min" and rep.converged
    assert np.linalg.norm(rep.xi) > 1
    assert c.params.amplitude == 64.0
    assert c.metric.tensor is c.tensor


def test_constructed_tensor_trace_free_with_negative_density(construction):
    rng = np.random.default_rng(11)
    d = rng.standard_normal((100, 3))
    x = d / np.linalg.norm(d, axis=1, keepdims=True) * rng.uniform(1, 5, (100, 1))
    T = construction.tensor
    scale = np.abs(T.components(x)).max()
    assert np.abs(trace_ambient(T, x)).max() <= 1e-14 * scale
    pts = rng.standard_normal((10_000, 3))
    assert scalar_density(T, pts).min() < 0


def test_larger_amplitudes_keep_the_minimum(construction):
    from outlying_cmc.functional import FunctionalContext, find_critical_point
    base = construction.params
    for factor in (2.0, 4.0):
        q = base.with_amplitude(factor * base.amplitude)
        ctx = FunctionalContext(counterexample_tensor(q), counterexample_grid(200))
        rep = find_critical_point(ctx, np.array([0.0, 0.0, 2.0]))
        assert rep.classification == "strict-min"


# --------------------------------------------------------------- export


def test_export_round_trip():
    p = BumpParams(200, 2.0, 64.0)
    doc = json.loads(json.dumps(export_profile(p, a_k=A_K200)))
    assert set(doc) == {"k", "s0", "t0", "a_k", "amplitude", "samples"}
    t = np.array([s[0] for s in doc["samples"]])
    np.testing.assert_allclose(t, np.linspace(-1, 1, 2048), rtol=0, atol=0)
    prof = profile_from_export(doc)
    tt = np.linspace(-1, 1, 5001)
    ref = counterexample_tensor(p.with_a(A_K200)).profile
    np.testing.assert_array_equal(prof(tt), ref(tt))
    with pytest.raises(InvalidArgumentError):
        profile_from_export({**doc, "extra": 1})
