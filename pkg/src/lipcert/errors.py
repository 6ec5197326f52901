"""Exception hierarchy shared by every lipcert module.

The CLI maps these onto exit codes, so each class belongs to exactly one
family: input problems, certification failures, or numerical failures.
"""

from __future__ import annotations

from typing import Any


class LipcertError(Exception):
    """Base class for all lipcert errors."""

    reason = "error"


# -- input errors (exit code 3) ---------------------------------------------


class InputError(LipcertError):
    reason = "input_error"


class DimensionError(InputError, ValueError):
    reason = "dimension_mismatch"


class ParseError(InputError):
    """Syntax or semantic error in a function spec."""

    reason = "parse_error"

    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class PreconditionError(InputError, ValueError):
    """A hypothesis of the bound being applied does not hold."""

    reason = "precondition_violation"


# -- certification impossible (exit code 2) ---------------------------------


class CertificationError(LipcertError):
    reason = "certification_failed"


class RankDeficiencyError(CertificationError):
    """The hull contains (numerically) singular members."""

    reason = "rank_deficient"

    def __init__(self, message: str, witness: Any = None):
        super().__init__(message)
        self.witness = witness


class WitnessError(CertificationError):
    reason = "separation_failed"


class DegenerateMapError(CertificationError):
    reason = "degenerate_map"


# -- numerical failures (exit code 4) ---------------------------------------


class NumericalError(LipcertError):
    reason = "numerical_failure"


class CalibrationError(NumericalError):
    reason = "calibration_failed"


class GeneratorOverflowError(NumericalError):
    reason = "generator_overflow"


class SamplingError(NumericalError):
    reason = "sampling_failed"


class HullDistanceError(NumericalError):
    """Minimum-norm iteration ran out of budget.

    ``interval`` holds the best certified (lower, upper) distance bracket.
    """

    reason = "hull_distance_budget"

    def __init__(self, message: str, interval: tuple[float, float]):
        super().__init__(message)
        self.interval = interval


class ConvergenceError(NumericalError):
    reason = "solve_nonconvergence"

    def __init__(self, message: str, trace: Any = None, target: Any = None):
        super().__init__(message)
        self.trace = trace
        self.target = target
