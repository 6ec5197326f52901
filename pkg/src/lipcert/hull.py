"""Finitely generated convex hulls of matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError
from .linalg_bounds import as_matrix, matrix_from_json, matrix_to_json

EXACT = "exact"
HEURISTIC = "heuristic"


def _dedupe(mats: Iterable[np.ndarray]) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    seen: set[bytes] = set()
    for m in mats:
        key = np.ascontiguousarray(m + 0.0).tobytes()  # +0.0 folds -0.0 into 0.0
        if key not in seen:
            seen.add(key)
            out.append(m)
    return out


@dataclass(frozen=True, eq=False)
class MatrixHull:
    """conv{G_1, ..., G_k}; generators are deduplicated, order preserved."""

    generators: tuple[np.ndarray, ...]
    exactness: str = EXACT
    label: str = ""
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        gens = _dedupe(as_matrix(g) for g in self.generators)
        if not gens:
            raise DimensionError("a hull needs at least one generator")
        shape = gens[0].shape
        for g in gens:
            if g.shape != shape:
                raise DimensionError(f"generator shapes differ: {g.shape} vs {shape}")
            g.setflags(write=False)
        if self.exactness not in (EXACT, HEURISTIC):
            raise ValueError(f"exactness must be {EXACT!r} or {HEURISTIC!r}")
        object.__setattr__(self, "generators", tuple(gens))

    @classmethod
    def of(cls, generators: Sequence, exactness: str = EXACT, label: str = "") -> "MatrixHull":
        return cls(tuple(np.asarray(g, dtype=float) for g in generators), exactness, label)

    @property
    def shape(self) -> tuple[int, int]:
        return self.generators[0].shape

    @property
    def size(self) -> int:
        return len(self.generators)

    @property
    def is_square(self) -> bool:
        return self.shape[0] == self.shape[1]

    def stacked(self) -> np.ndarray:
        return np.stack(self.generators)

    def combination(self, weights) -> np.ndarray:
        w = np.asarray(weights, dtype=float)
        if w.shape != (self.size,):
            raise DimensionError(f"expected {self.size} weights, got shape {w.shape}")
        return np.tensordot(w, self.stacked(), axes=1)

    def columns(self, start: int, stop: int | None = None, label: str = "") -> "MatrixHull":
        """Hull of column slices ``G[:, start:stop]`` (contains the partial Jacobian)."""
        return MatrixHull(tuple(g[:, start:stop] for g in self.generators),
                          self.exactness, label or f"{self.label}[:, {start}:{stop}]")

    def minkowski_sum(self, other: "MatrixHull", label: str = "") -> "MatrixHull":
        if self.shape != other.shape:
            raise DimensionError("Minkowski sum needs equal shapes")
        gens = tuple(a + b for a in self.generators for b in other.generators)
        exactness = EXACT if EXACT == self.exactness == other.exactness else HEURISTIC
        return MatrixHull(gens, exactness, label or f"{self.label} + {other.label}")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "exactness": self.exactness,
            "generators": [matrix_to_json(g) for g in self.generators],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MatrixHull":
        return cls(tuple(matrix_from_json(g) for g in d["generators"]),
                   d.get("exactness", EXACT), d.get("label", ""))
