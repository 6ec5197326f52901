"""Built-in reference scenarios: an implicit function and a perturbed base map."""

from __future__ import annotations

import math

from .certify import PAPER, SHARP, certify_implicit, perturbation_check
from .expr import FunctionModel, parse_function

EXAMPLE1_F = "F(x, y, z) = (2*x + abs(y) + 3*y, 2*x + abs(z) + 3*z)"
EXAMPLE2_F0 = "f0(x, y) = (abs(x) + 2*x, abs(y) + 2*y)"
EXAMPLE2_H_SMALL = "h(x, y) = (0.5*abs(x), 0.5*abs(y))"
EXAMPLE2_H_LARGE = "h(x, y) = (1.5*abs(x), 1.5*abs(y))"

# published constants for the admissible perturbation, case L < K
EXAMPLE2_CASE1_OVERRIDES = {"delta": 1.0, "r": 1.0, "K": 3.5}
EXAMPLE1_K = math.sqrt(24.0)

SPECS = {
    "example1_F": EXAMPLE1_F,
    "example2_f0": EXAMPLE2_F0,
    "example2_h_small": EXAMPLE2_H_SMALL,
    "example2_h_large": EXAMPLE2_H_LARGE,
}

NAMES = ("paper-example-1", "paper-example-2-case-1", "paper-example-2-case-2")


def model(key: str) -> FunctionModel:
    return parse_function(SPECS[key])


def run_example(name: str, convention: str = PAPER, seed: int = 0):
    """Return ``(kind, result)`` for a named scenario."""
    if convention not in (PAPER, SHARP):
        raise ValueError(f"unknown convention {convention!r}")
    if name == "paper-example-1":
        K = EXAMPLE1_K if convention == PAPER else None
        cert = certify_implicit(model("example1_F"), [0.0], [0.0, 0.0], r_max=1.0, K=K,
                                seed=seed)
        return "implicit", cert
    if name.startswith("paper-example-2-case-"):
        h = "example2_h_small" if name.endswith("1") else "example2_h_large"
        overrides = EXAMPLE2_CASE1_OVERRIDES if convention == PAPER else None
        report = perturbation_check(model("example2_f0"), model(h), [0.0, 0.0], r_max=1.0,
                                    convention=convention, overrides=overrides, seed=seed)
        return "perturbation", report
    raise ValueError(f"unknown example {name!r}; choose from {', '.join(NAMES)}")
