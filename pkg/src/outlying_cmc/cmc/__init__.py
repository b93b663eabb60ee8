"""Large constant mean curvature spheres by Lyapunov-Schmidt reduction."""
from __future__ import annotations

from .geometry import Geometry, SphericalGraph, SurfaceRule, graph_geometry, scaled_geometry, surface_rule
from .harmonics import HarmonicBasis, harmonic_indices
from .metric import MetricSpec, metric_components, metric_eval
from .solver import (
    CMCResult,
    LyapunovSchmidtSolver,
    calibrate_multipliers,
    SolveReport,
    f_lambda,
    find_cmc,
    legendre_height_profile,
    lyapunov_schmidt_solve,
)

__all__ = [
    "CMCResult",
    "Geometry",
    "HarmonicBasis",
    "LyapunovSchmidtSolver",
    "MetricSpec",
    "SolveReport",
    "SphericalGraph",
    "SurfaceRule",
    "calibrate_multipliers",
    "f_lambda",
    "find_cmc",
    "graph_geometry",
    "harmonic_indices",
    "legendre_height_profile",
    "lyapunov_schmidt_solve",
    "metric_components",
    "metric_eval",
    "scaled_geometry",
    "surface_rule",
]
