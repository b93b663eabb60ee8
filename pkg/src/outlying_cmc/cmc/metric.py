"""Metric g = (1 + 1/|x|)^4 delta + T and its first derivatives."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, MetricDegenerateError
from ..tensors import PerturbationTensor, ZeroTensor

__all__ = ["MetricSpec", "metric_eval", "metric_components", "det3"]


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """Schwarzschild conformal factor (mass 2) plus a perturbation tensor.

    ``flat=True`` switches the conformal factor off (test mode: g = delta + T).
    """

    tensor: PerturbationTensor = field(default_factory=ZeroTensor)
    flat: bool = False

    @property
    def is_schwarzschild(self):
        return isinstance(self.tensor, ZeroTensor)


def metric_components(m: MetricSpec, x, derivatives=True, check=True):
    """Vectorized g_ij(x) and d_k g_ij(x) (last index k) for points x of shape (..., 3)."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    eye = np.eye(3)
    if m.flat:
        u4 = np.ones_like(r)
    else:
        u = 1.0 + 1.0 / r
        u4 = u**4
    g = u4[..., None, None] * eye
    zero_tensor = isinstance(m.tensor, ZeroTensor)
    if not zero_tensor:
        g = g + m.tensor.components(x)
    dg = None
    if derivatives:
        if m.flat:
            dg = np.zeros(x.shape[:-1] + (3, 3, 3))
        else:
            # d_k u^4 = -4 u^3 x_k / r^3
            du4 = (-4.0 * u**3 / r**3)[..., None] * x
            dg = eye[:, :, None] * du4[..., None, None, :]
        if not zero_tensor:
            dg = dg + m.tensor.gradient(x)
    if check and not zero_tensor:
        _check_positive(g, x)
    return g, dg


def det3(g):
    """Determinant of a stack of 3x3 matrices."""
    return (g[..., 0, 0] * (g[..., 1, 1] * g[..., 2, 2] - g[..., 1, 2] * g[..., 2, 1])
            - g[..., 0, 1] * (g[..., 1, 0] * g[..., 2, 2] - g[..., 1, 2] * g[..., 2, 0])
            + g[..., 0, 2] * (g[..., 1, 0] * g[..., 2, 1] - g[..., 1, 1] * g[..., 2, 0]))


def _check_positive(g, x):
    # Sylvester's criterion on the leading minors
    m1 = g[..., 0, 0]
    m2 = m1 * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    if not (np.all(m1 > 0) and np.all(m2 > 0) and np.all(det3(g) > 0)):
        eig = np.linalg.eigvalsh(g.reshape(-1, 3, 3))[:, 0]
        i = int(np.argmin(eig))
        bad = np.asarray(x).reshape(-1, 3)[i]
        raise MetricDegenerateError(
            f"metric not positive definite at {bad.tolist()} (eigenvalue {eig[i]:.3e})"
        ) from None


def metric_eval(m: MetricSpec, x):
    """g_ij and d_k g_ij at a single point (or batch) with |x| > 1."""
    x = np.asarray(x, dtype=float)
    if np.any(np.linalg.norm(x, axis=-1) <= 1.0):
        raise DomainError("metric is evaluated only for |x| > 1")
    return metric_components(m, x)
