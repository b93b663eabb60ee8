"""
outlying_cmc: the reduced area functional of perturbed Schwarzschild data
and the large outlying constant mean curvature spheres it predicts.

Submodules
----------
quadrature         sphere and ball rules, including level-adapted ones
special_functions  Legendre recurrences and the reduced-area series
tensors            homogeneous perturbation tensors and their traces
functional         F with its derivatives and critical points
counterexample     the bump construction with a strict minimum of F
cmc                Lyapunov-Schmidt solver for the CMC spheres
verification       numerical check suites shared by the CLI and the tests
cli                batch front end
"""
from __future__ import annotations

from . import errors
from .errors import *  # noqa: F401,F403
from .functional import (
    FunctionalContext,
    eval_F,
    eval_G,
    eval_K,
    find_critical_point,
    phi_lower_bound,
    radial_derivative_F,
    schwarzschild_part,
)
from .tensors import AxisymmetricTensor, IsotropicTensor, ZeroTensor, tensor_from_spec

__version__ = "0.1.0"
