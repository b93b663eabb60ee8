"""End-to-end acceptance checks; each prints one PASS/FAIL line."""
from __future__ import annotations

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from outlying_cmc.cmc import MetricSpec, find_cmc
from outlying_cmc.counterexample import BumpParams, certify_minimum, construct
from outlying_cmc.tensors import scalar_density, trace_ambient
from outlying_cmc.verification import (
    cmc_scaling_suite,
    flux_suite,
    identity_suite,
    mechanism_suite,
    positivity_suite,
)


class Criterion:
    """Collects named conditions, records the verdict line, then asserts."""

    def __init__(self, number, title, budget):
        self.number, self.title, self.budget = number, title, budget
        self.failed = []
        self.start = time.perf_counter()

    def check(self, name, ok, detail=""):
        if not ok:
            self.failed.append(f"{name} {detail}".strip())

    def suite(self, result):
        for c in result.failures():
            self.failed.append(f"{c.name} value={c.value:.3g} threshold={c.threshold:.3g}")

    def finish(self):
        elapsed = time.perf_counter() - self.start
        self.check("runtime", elapsed < self.budget, f"{elapsed:.1f}s >= {self.budget}s")
        verdict = "PASS" if not self.failed else "FAIL"
        line = f"criterion {self.number} {verdict} {self.title} ({elapsed:.1f}s)"
        if self.failed:
            line += ": " + "; ".join(self.failed)
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert not self.failed, line


def test_criterion_1_identities():
    c = Criterion(1, "identity suite", 30)
    c.suite(identity_suite(tol=1e-8, series_tol=1e-10, radii=(1.5, 2.0, 5.0)))
    c.finish()


def test_criterion_2_positivity():
    c = Criterion(2, "positivity certificate", 5)
    c.suite(positivity_suite(samples=400, r_min=1.01, r_max=100.0, bound_range=(10.0, 160.0)))
    c.finish()


def test_criterion_3_flux():
    c = Criterion(3, "flux identity", 60)
    c.suite(flux_suite(tol=1e-6, rel_tol=1e-7, k=200, s_values=(1.0, 1.5, 2.0, 3.0, 5.0)))
    c.finish()


@pytest.fixture(scope="module")
def construction():
    t = time.perf_counter()
    cert = certify_minimum(BumpParams(200, 2.0))
    built = construct(BumpParams(200, 2.0), certificate=cert)
    return built, time.perf_counter() - t


def test_criterion_4_counterexample(construction):
    c = Criterion(4, "counterexample certification", 300)
    built, spent = construction
    c.start -= spent
    cert = built.certificate
    c.check("gradient", cert.gradient_norm <= 1e-5, f"{cert.gradient_norm:.3g}")
    c.check("eigenvalues", bool(np.all(cert.hessian_eigenvalues > 0)),
            str(cert.hessian_eigenvalues))
    c.check("transverse pair", cert.axis_eigenvalue_pair_gap <= 1e-6,
            f"{cert.axis_eigenvalue_pair_gap:.3g}")
    c.check("F minimum", built.critical_point.classification == "strict-min")

    rng = np.random.default_rng(2024)
    d = rng.standard_normal((100, 3))
    x = d / np.linalg.norm(d, axis=1, keepdims=True) * rng.uniform(1.0, 10.0, (100, 1))
    T = built.tensor
    tr = np.abs(trace_ambient(T, x)).max()
    c.check("trace-free", tr <= 1e-14 * np.abs(T.components(x)).max(), f"{tr:.3g}")
    pts = rng.standard_normal((10_000, 3))
    dens = scalar_density(T, pts).min()
    c.check("negative density", dens < 0, f"min={dens:.3g}")
    c.finish()


def test_criterion_5_lyapunov_schmidt():
    c = Criterion(5, "Lyapunov-Schmidt convergence", 1800)
    c.suite(cmc_scaling_suite(lams=(100.0, 300.0, 1000.0, 3000.0), degree=8, profile_tol=5e-2,
                              drop=6.0, volume_tol=1e-10))
    c.finish()


def test_criterion_6_end_to_end(construction):
    c = Criterion(6, "outlying CMC sphere", 3600)
    built, _ = construction
    res = find_cmc(MetricSpec(built.tensor), np.array([0.0, 0.0, built.params.s0]), 1e3)
    cp = res.critical_point
    c.check("strict minimum", cp.converged and cp.classification == "strict-min",
            cp.classification)
    c.check("interior", np.linalg.norm(res.xi) > 1, str(res.xi))
    c.check("hessian", bool(np.all(cp.hessian_eigenvalues > 0)), str(cp.hessian_eigenvalues))
    c.check("multiplier drop", res.multiplier_ratio >= 10, f"{res.multiplier_ratio:.3g}")
    c.check("volume", abs(res.report.volume / (4e9 * np.pi / 3) - 1) <= 1e-10)
    c.finish()


def test_criterion_7_mechanism():
    c = Criterion(7, "nonnegative density mechanism", 600)
    c.suite(mechanism_suite(samples=20, r_range=(1.2, 10.0), margin=1e-5))
    c.finish()
