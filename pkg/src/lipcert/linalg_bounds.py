"""Dense matrix norms, smallest singular values and inverse perturbation bounds.

Matrices are plain 2-D float ``numpy`` arrays. Singular values come from
LAPACK through ``numpy.linalg.svd``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import DimensionError, PreconditionError

TOL_LINALG = 1e-9


def as_matrix(a: Any) -> np.ndarray:
    """Coerce ``a`` into a finite 2-D float array."""
    m = np.array(a, dtype=float)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2 or m.size == 0:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def _require_square(a: np.ndarray) -> None:
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"square matrix required, got {a.shape[0]}x{a.shape[1]}")


def op_norm(a: Any) -> float:
    """Spectral norm, i.e. the largest singular value."""
    a = as_matrix(a)
    return float(np.linalg.svd(a, compute_uv=False)[0])


def frobenius_norm(a: Any) -> float:
    a = as_matrix(a)
    return float(np.sqrt(np.sum(a * a)))


def sigma_min(a: Any) -> float:
    """Smallest singular value of a square matrix (``1/||A^-1||`` when invertible)."""
    a = as_matrix(a)
    _require_square(a)
    return float(np.linalg.svd(a, compute_uv=False)[-1])


def neumann_inverse(f: Any) -> tuple[np.ndarray, float]:
    """Return ``(I - F)^-1`` and the bound ``1/(1 - ||F||)`` on its norm.

    The inverse is obtained by a direct solve; the bound is the one implied
    by summing the geometric series, valid only when ``||F|| < 1``.
    """
    f = as_matrix(f)
    _require_square(f)
    nf = op_norm(f)
    if nf >= 1.0:
        raise PreconditionError(f"||F|| = {nf:.6g} >= 1, Neumann bound does not apply")
    eye = np.eye(f.shape[0])
    inv = np.linalg.solve(eye - f, eye)
    return inv, 1.0 / (1.0 - nf)


@dataclass(frozen=True)
class PerturbationCheck:
    r: float
    nonsingular: bool
    deviation: float | None = None
    bound: float | None = None

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "nonsingular": self.nonsingular,
            "deviation": self.deviation,
            "bound": self.bound,
        }


def perturbed_inverse_check(a: Any, e: Any) -> PerturbationCheck:
    """Check ``||(A+E)^-1 - A^-1|| <= ||E|| ||A^-1||^2 / (1 - r)`` with ``r = ||A^-1 E||``.

    When ``r >= 1`` no claim is made and only ``r`` is reported.
    """
    a = as_matrix(a)
    e = as_matrix(e)
    _require_square(a)
    if e.shape != a.shape:
        raise DimensionError(f"E has shape {e.shape}, A has shape {a.shape}")
    smin = sigma_min(a)
    if smin <= TOL_LINALG * max(1.0, op_norm(a)):
        raise PreconditionError("A is singular to working precision")
    a_inv = np.linalg.inv(a)
    r = op_norm(a_inv @ e)
    if r >= 1.0:
        return PerturbationCheck(r=r, nonsingular=False)
    deviation = op_norm(np.linalg.inv(a + e) - a_inv)
    bound = op_norm(e) * op_norm(a_inv) ** 2 / (1.0 - r)
    return PerturbationCheck(r=r, nonsingular=True, deviation=deviation, bound=bound)


def matrix_to_json(a: Any) -> dict:
    a = as_matrix(a)
    return {
        "rows": int(a.shape[0]),
        "cols": int(a.shape[1]),
        "entries": [float(x) for x in a.ravel()],
    }


def matrix_from_json(d: dict) -> np.ndarray:
    rows, cols, entries = d["rows"], d["cols"], d["entries"]
    if rows < 1 or cols < 1 or len(entries) != rows * cols:
        raise DimensionError(
            f"matrix JSON declares {rows}x{cols} but carries {len(entries)} entries"
        )
    return as_matrix(np.asarray(entries, dtype=float).reshape(rows, cols))
