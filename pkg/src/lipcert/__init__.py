"""Certified local inverse and implicit functions for piecewise-affine maps."""

__version__ = "0.1.0"

from .certify import (  # noqa: E402
    PAPER,
    SHARP,
    certify_implicit,
    certify_inverse,
    openness_margin,
    perturbation_check,
)
from .expr import FunctionModel, load_function, parse_function  # noqa: E402
from .funcspec import Ball, bilipschitz_lower, clarke_generators, evaluate, lipschitz_upper  # noqa: E402
from .genjac import delta_of_hull, dist_to_hull, maximal_rank_check  # noqa: E402
from .hull import MatrixHull  # noqa: E402
from .invert import implicit_solve, local_invert, validate_certificate, validate_implicit  # noqa: E402

__all__ = [
    "PAPER", "SHARP", "Ball", "FunctionModel", "MatrixHull",
    "bilipschitz_lower", "certify_implicit", "certify_inverse", "clarke_generators",
    "delta_of_hull", "dist_to_hull", "evaluate", "implicit_solve", "lipschitz_upper",
    "load_function", "local_invert", "maximal_rank_check", "openness_margin",
    "parse_function", "perturbation_check", "validate_certificate", "validate_implicit",
]
