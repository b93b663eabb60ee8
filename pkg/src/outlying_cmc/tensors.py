"""
Homogeneous degree -2 symmetric perturbation tensors on R^3 minus the origin.

Every tensor exposes vectorized components and their first and second
derivatives.  Index conventions for an array of points of shape (..., 3):

    components(x)[..., i, j]        = T_ij(x)
    gradient(x)[..., i, j, k]       = D_k T_ij(x)
    hessian(x)[..., i, j, k, m]     = D_k D_m T_ij(x)

The axisymmetric family

    T = -2 |x|^-2 psi(x3/|x|) (dx1 dx1 + dx2 dx2 - 2 dx3 dx3)

is trace free by construction and is differentiated analytically through
psi, psi' and psi''.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, InvalidArgumentError

__all__ = [
    "PerturbationTensor",
    "ZeroTensor",
    "IsotropicTensor",
    "AxisymmetricProfile",
    "AxisymmetricTensor",
    "FiniteDifferenceTensor",
    "constant_profile",
    "table_profile",
    "homogeneous_scalar",
    "trace_ambient",
    "trace_sphere",
    "normal_derivative_trace",
    "scalar_density",
    "euler_residual",
    "divergence_integrand",
    "tensor_from_spec",
]

SPHERE_TOL = 1e-12
_AXIAL = np.array([1.0, 1.0, -2.0])
_E3 = np.array([0.0, 0.0, 1.0])


def _points(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise InvalidArgumentError("points must have a trailing dimension of 3")
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0.0):
        raise DomainError("tensor fields are singular at the origin")
    return x, r


def homogeneous_scalar(x, p, phi, dphi, ddphi, order=2):
    """Value and first two derivatives of h(x) = |x|^p phi(x3/|x|).

    ``phi``, ``dphi``, ``ddphi`` are the profile and its first two
    derivatives, evaluated on arrays.  Returns a tuple whose length is
    ``order + 1``.
    """
    x, r = _points(x)
    n = x / r[..., None]
    t = n[..., 2]
    f0 = phi(t)
    R = r**p
    h = R * f0
    if order == 0:
        return (h,)
    f1 = dphi(t)
    rk = r[..., None]
    tk = (_E3 - t[..., None] * n) / rk
    Rk = (p * r ** (p - 1))[..., None] * n
    grad = Rk * f0[..., None] + (R * f1)[..., None] * tk
    if order == 1:
        return h, grad
    f2 = ddphi(t)
    eye = np.eye(3)
    nn = n[..., :, None] * n[..., None, :]
    e3n = _E3[:, None] * n[..., None, :]
    tmk = (
        -e3n
        - np.swapaxes(e3n, -1, -2)
        + 3.0 * t[..., None, None] * nn
        - t[..., None, None] * eye
    ) / (r**2)[..., None, None]
    Rmk = (p * r ** (p - 2))[..., None, None] * ((p - 2) * nn + eye)
    cross = Rk[..., :, None] * tk[..., None, :]
    hess = (
        Rmk * f0[..., None, None]
        + f1[..., None, None] * (cross + np.swapaxes(cross, -1, -2))
        + R[..., None, None]
        * (f2[..., None, None] * tk[..., :, None] * tk[..., None, :] + f1[..., None, None] * tmk)
    )
    return h, grad, hess


class PerturbationTensor:
    """Interface of a homogeneous degree -2 symmetric 2-tensor field."""

    #: derivatives come from finite differences rather than closed forms
    reduced_precision = False
    #: values of x3/|x| across which the field varies sharply
    t_breakpoints: tuple = ()

    def components(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError

    def to_spec(self):
        raise NotImplementedError(f"{type(self).__name__} has no JSON form")


class ZeroTensor(PerturbationTensor):
    def components(self, x):
        x, _ = _points(x)
        return np.zeros(x.shape + (3,))

    def gradient(self, x):
        x, _ = _points(x)
        return np.zeros(x.shape + (3, 3))

    def hessian(self, x):
        x, _ = _points(x)
        return np.zeros(x.shape + (3, 3, 3))

    def to_spec(self):
        return {"type": "zero"}


class _ScalarTimesConstant(PerturbationTensor):
    """T_ij = h(x) M_ij for a homogeneous scalar h and a constant matrix M."""

    matrix: np.ndarray

    def _scalar(self, x, order):
        raise NotImplementedError

    def components(self, x):
        (h,) = self._scalar(x, 0)
        return h[..., None, None] * self.matrix

    def gradient(self, x):
        _, g = self._scalar(x, 1)
        return self.matrix[:, :, None] * g[..., None, None, :]

    def hessian(self, x):
        _, _, H = self._scalar(x, 2)
        return self.matrix[:, :, None, None] * H[..., None, None, :, :]


class IsotropicTensor(_ScalarTimesConstant):
    """T = c |x|^-2 (identity); its density is -4c|x|^-4, nonnegative for c <= 0."""

    def __init__(self, c):
        self.c = float(c)
        self.matrix = np.eye(3)

    def _scalar(self, x, order):
        c = self.c
        return homogeneous_scalar(
            x,
            -2,
            lambda t: np.full_like(t, c),
            np.zeros_like,
            np.zeros_like,
            order=order,
        )

    def to_spec(self):
        return {"type": "isotropic", "c": self.c}


@dataclass(frozen=True)
class AxisymmetricProfile:
    """A smooth function psi on [-1, 1] together with psi' and psi''.

    ``breakpoints`` lists arguments near which psi changes sharply; quadrature
    rules use them to place panel boundaries.
    """

    value: Callable
    d1: Callable
    d2: Callable
    metadata: dict = field(default_factory=dict)
    breakpoints: tuple = ()

    def __call__(self, t):
        return self.value(np.asarray(t, dtype=float))

    def scaled(self, factor):
        f = float(factor)
        meta = dict(self.metadata)
        meta["amplitude"] = meta.get("amplitude", 1.0) * f
        return AxisymmetricProfile(
            lambda t: f * self.value(t),
            lambda t: f * self.d1(t),
            lambda t: f * self.d2(t),
            meta,
            self.breakpoints,
        )

    def check_finite(self, samples=2049):
        t = np.linspace(-1.0, 1.0, samples)
        for fn in (self.value, self.d1, self.d2):
            if not np.all(np.isfinite(fn(t))):
                raise InvalidArgumentError("profile or its derivatives are not finite on [-1, 1]")


def constant_profile(c):
    c = float(c)
    return AxisymmetricProfile(
        lambda t: np.full_like(np.asarray(t, dtype=float), c),
        lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        {"type": "constant", "c": c},
    )


def table_profile(samples):
    """Natural cubic-spline profile through ``[[t, psi], ...]`` samples."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 4:
        raise InvalidArgumentError("table profile needs at least 4 [t, psi] pairs")
    order = np.argsort(arr[:, 0])
    t, v = arr[order, 0], arr[order, 1]
    if np.any(np.diff(t) <= 0):
        raise InvalidArgumentError("table abscissae must be distinct")
    spline = CubicSpline(t, v, bc_type="natural")
    d1, d2 = spline.derivative(1), spline.derivative(2)
    return AxisymmetricProfile(spline, d1, d2, {"type": "table", "samples": arr.tolist()})


class AxisymmetricTensor(_ScalarTimesConstant):
    """T = -2 |x|^-2 psi(x3/|x|) diag(1, 1, -2)."""

    def __init__(self, profile: AxisymmetricProfile):
        self.profile = profile
        self.matrix = np.diag(_AXIAL)
        self.t_breakpoints = tuple(profile.breakpoints)

    def _scalar(self, x, order):
        p = self.profile
        return homogeneous_scalar(
            x,
            -2,
            lambda t: -2.0 * p.value(t),
            lambda t: -2.0 * p.d1(t),
            lambda t: -2.0 * p.d2(t),
            order=order,
        )

    def components(self, x):
        (h,) = self._scalar(x, 0)
        # assemble diag(h, h, -2h) so the trace cancels exactly
        out = np.zeros(h.shape + (3, 3))
        out[..., 0, 0] = h
        out[..., 1, 1] = h
        out[..., 2, 2] = -2.0 * h
        return out

    def to_spec(self):
        meta = dict(self.profile.metadata)
        kind = meta.get("type")
        if kind == "counterexample":
            prof = {k: meta[k] for k in ("type", "k", "s0", "amplitude")}
            if "a_k" in meta:
                prof["a_k"] = meta["a_k"]
        elif kind == "table":
            prof = {"type": "table", "samples": meta["samples"]}
        elif kind == "constant":
            prof = {"type": "constant", "c": meta["c"]}
        else:
            raise NotImplementedError("profile has no JSON form")
        return {"type": "axisymmetric", "profile": prof}


class FiniteDifferenceTensor(PerturbationTensor):
    """User-supplied components; derivatives by fourth-order central differences.

    ``func`` maps points (..., 3) to symmetric matrices (..., 3, 3).  The
    homogeneity and symmetry of ``func`` are the caller's responsibility.
    """

    reduced_precision = True

    def __init__(self, func, rel_step=1e-3):
        self.func = func
        self.rel_step = float(rel_step)

    def components(self, x):
        x, _ = _points(x)
        return np.asarray(self.func(x), dtype=float)

    def _diff(self, fn, x):
        x, r = _points(x)
        h = (self.rel_step * r)[..., None]
        out = []
        for k in range(3):
            e = np.zeros(3)
            e[k] = 1.0
            d = h * e
            f1 = fn(x + d) - fn(x - d)
            f2 = fn(x + 2 * d) - fn(x - 2 * d)
            hk = h[..., 0].reshape(h.shape[:-1] + (1,) * (f1.ndim - x.ndim + 1))
            out.append((8.0 * f1 - f2) / (12.0 * hk))
        return np.stack(out, axis=-1)

    def gradient(self, x):
        return self._diff(self.components, x)

    def hessian(self, x):
        return self._diff(self.gradient, x)


def trace_ambient(T, x):
    """Euclidean trace of T at x."""
    c = T.components(x)
    return np.trace(c, axis1=-2, axis2=-1)


def _unit_normals(xi, x):
    xi = np.asarray(xi, dtype=float)
    x = np.asarray(x, dtype=float)
    nu = x - xi
    length = np.linalg.norm(nu, axis=-1)
    if np.any(np.abs(length - 1.0) > SPHERE_TOL * np.maximum(1.0, np.linalg.norm(xi))):
        raise InvalidArgumentError("evaluation point is not on the unit sphere about xi")
    return nu


def _quad_form(M, v):
    return np.einsum("...ij,...i,...j->...", M, v, v)


def trace_sphere(T, xi, x):
    """Trace of T restricted to the tangent plane of the unit sphere about xi."""
    nu = _unit_normals(xi, x)
    c = T.components(x)
    return np.trace(c, axis1=-2, axis2=-1) - _quad_form(c, nu)


def normal_derivative_trace(T, xi, x):
    """Tangential trace of D_nu T on the unit sphere about xi."""
    nu = _unit_normals(xi, x)
    dnu = np.einsum("...ijk,...k->...ij", T.gradient(x), nu)
    return np.trace(dnu, axis1=-2, axis2=-1) - _quad_form(dnu, nu)


def scalar_density(T, x):
    """sum_ij (D_i D_j T_ij - D_i D_i T_jj), homogeneous of degree -4."""
    H = T.hessian(x)
    div2 = np.einsum("...ijij->...", H)
    lap_tr = np.einsum("...jjii->...", H)
    return div2 - lap_tr


def euler_residual(T, x):
    """Max-norm of x^k D_k T + 2T (zero for degree -2 homogeneity)."""
    x = np.asarray(x, dtype=float)
    res = np.einsum("...ijk,...k->...ij", T.gradient(x), x) + 2.0 * T.components(x)
    return np.max(np.abs(res), axis=(-2, -1))


def divergence_integrand(T, xi, x):
    """2 tr T - 3 tr_S T - tr_S(D_nu T) on the unit sphere about xi.

    Its surface integral equals the ball integral of the scalar density.
    """
    nu = _unit_normals(xi, x)
    c = T.components(x)
    tr = np.trace(c, axis1=-2, axis2=-1)
    tr_s = tr - _quad_form(c, nu)
    dnu = np.einsum("...ijk,...k->...ij", T.gradient(x), nu)
    tr_s_d = np.trace(dnu, axis1=-2, axis2=-1) - _quad_form(dnu, nu)
    return 2.0 * tr - 3.0 * tr_s - tr_s_d


def tensor_from_spec(spec):
    """Build a tensor from its JSON description.

    Accepted forms::

        {"type": "zero"}
        {"type": "isotropic", "c": real}
        {"type": "axisymmetric", "profile": PROFILE}

    where PROFILE is ``{"type": "counterexample", "k", "s0", "amplitude"}``
    (optionally with a cached ``"a_k"``), ``{"type": "table", "samples"}``
    or ``{"type": "constant", "c"}``.  A profile export document (keys
    ``k, s0, t0, a_k, amplitude, samples``) is also accepted and rebuilt as
    the analytic counterexample profile.
    """
    if not isinstance(spec, dict):
        raise InvalidArgumentError("tensor description must be a JSON object")
    if "type" not in spec and {"k", "s0", "a_k", "amplitude"} <= spec.keys():
        from .counterexample import profile_from_export

        return AxisymmetricTensor(profile_from_export(spec))
    kind = spec.get("type")
    if kind == "zero":
        _reject_extra(spec, {"type"})
        return ZeroTensor()
    if kind == "isotropic":
        _reject_extra(spec, {"type", "c"})
        return IsotropicTensor(spec["c"])
    if kind == "axisymmetric":
        _reject_extra(spec, {"type", "profile"})
        prof = spec.get("profile")
        if not isinstance(prof, dict):
            raise InvalidArgumentError("axisymmetric tensor needs a profile object")
        pk = prof.get("type")
        if pk == "counterexample":
            _reject_extra(prof, {"type", "k", "s0", "amplitude", "a_k"})
            from .counterexample import BumpParams, counterexample_profile

            params = BumpParams(int(prof["k"]), float(prof["s0"]), float(prof["amplitude"]))
            return AxisymmetricTensor(counterexample_profile(params, a_k=prof.get("a_k")))
        if pk == "table":
            _reject_extra(prof, {"type", "samples"})
            return AxisymmetricTensor(table_profile(prof["samples"]))
        if pk == "constant":
            _reject_extra(prof, {"type", "c"})
            return AxisymmetricTensor(constant_profile(prof["c"]))
        raise InvalidArgumentError(f"unknown profile type {pk!r}")
    raise InvalidArgumentError(f"unknown tensor type {kind!r}")


def _reject_extra(obj, allowed):
    extra = set(obj) - set(allowed)
    if extra:
        raise InvalidArgumentError(f"unknown keys {sorted(extra)}")
