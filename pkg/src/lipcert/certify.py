"""Certificates for local inversion, implicit functions and perturbations.

Every certificate is built from independently computed constants. In
``paper_convention`` mode the caller may override ``K``, ``delta`` and
``r`` to reproduce hand-computed values; the computed constants are then
kept alongside in ``computed`` and any disagreement lands in ``notes``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import (
    DegenerateMapError,
    DimensionError,
    PreconditionError,
    RankDeficiencyError,
)
from .expr import FunctionModel, add_models
from .funcspec import Ball, bilipschitz_lower, clarke_generators, evaluate, lipschitz_upper
from .genjac import (
    DEFAULT_MESH,
    RankCheck,
    calibrate_radius,
    delta_of_hull,
    dist_to_hull,
    maximal_rank_check,
)
from .hull import EXACT, HEURISTIC, MatrixHull

SHARP = "sharp"
PAPER = "paper_convention"
CONVENTIONS = (SHARP, PAPER)
OVERRIDABLE = ("K", "delta", "r")
ZERO_RESIDUAL = 1e-12
CONTAINMENT_TOL = 1e-9


def _vec(x) -> tuple[float, ...]:
    return tuple(float(v) for v in np.asarray(x, dtype=float).reshape(-1))


def _check_convention(convention: str, overrides: Mapping | None) -> dict:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(OVERRIDABLE)
    if unknown:
        raise ValueError(f"cannot override {sorted(unknown)}; allowed: {OVERRIDABLE}")
    if overrides and convention != PAPER:
        raise ValueError("overrides are only accepted in paper_convention mode")
    for key, val in overrides.items():
        if not val > 0:
            raise ValueError(f"override {key} must be positive, got {val}")
    return {k: float(v) for k, v in overrides.items()}


def _rank_or_raise(hull: MatrixHull, mesh: float, what: str) -> RankCheck:
    check = maximal_rank_check(hull, mesh)
    if not check.maximal:
        raise RankDeficiencyError(
            f"{what} is not of maximal rank (certified delta = 0)", witness=witness_of(hull, check)
        )
    return check


def witness_of(hull: MatrixHull, check: RankCheck) -> dict | None:
    if check.witness is None:
        return None
    M = hull.combination(check.witness)
    return {
        "weights": list(check.witness),
        "matrix": M.tolist(),
        "sigma_min": float(np.linalg.svd(M, compute_uv=False)[-1]),
    }


@dataclass(frozen=True)
class InverseCertificate:
    """Radii of ``U = B(x0, U_radius)`` and ``V = B(f(x0), V_radius)`` with ``L(g) <= Lg``."""

    x0: tuple[float, ...]
    f_x0: tuple[float, ...]
    K: float
    delta: float
    r: float
    U_radius: float
    V_radius: float
    Lg: float
    provenance: str
    exactness: str
    computed: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    @classmethod
    def from_constants(cls, x0, f_x0, K, delta, r, provenance, exactness,
                       computed=None, overrides=None, notes=()) -> "InverseCertificate":
        if not K > 0:
            raise DegenerateMapError("Lipschitz constant is zero; the map is constant")
        return cls(
            x0=_vec(x0), f_x0=_vec(f_x0), K=float(K), delta=float(delta), r=float(r),
            U_radius=r * delta / (2.0 * K), V_radius=r * delta / 2.0, Lg=1.0 / delta,
            provenance=provenance, exactness=exactness,
            computed=dict(computed or {}), overrides=dict(overrides or {}), notes=tuple(notes),
        )

    def to_dict(self) -> dict:
        return {
            "type": "inverse_certificate",
            "x0": list(self.x0),
            "f_x0": list(self.f_x0),
            "K": self.K,
            "delta": self.delta,
            "r": self.r,
            "U_radius": self.U_radius,
            "V_radius": self.V_radius,
            "Lg": self.Lg,
            "provenance": self.provenance,
            "exactness": self.exactness,
            "computed": self.computed,
            "overrides": self.overrides,
            "notes": list(self.notes),
        }


def _override_notes(computed: dict, overrides: dict) -> list[str]:
    notes = []
    for key, val in sorted(overrides.items()):
        got = computed.get(key)
        if got is not None and not math.isclose(got, val, rel_tol=1e-12, abs_tol=1e-15):
            extra = ""
            if key == "delta" and "delta_method" in computed:
                extra = f" ({computed['delta_method']})"
            notes.append(f"override {key} = {val:.12g} differs from computed {key} = "
                         f"{got:.12g}{extra}")
    return notes


def certify_inverse(model: FunctionModel, x0, r_max: float = 1.0, convention: str = SHARP,
                    overrides: Mapping | None = None, mesh: float = DEFAULT_MESH,
                    budget: int = 256, seed: int = 0) -> InverseCertificate:
    """Certified local inverse of a square model around ``x0``."""
    overrides = _check_convention(convention, overrides)
    if not model.is_square:
        raise DimensionError(f"inverse certification needs a square model, got "
                             f"{model.input_dim} -> {model.output_dim}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.input_dim,):
        raise DimensionError(f"x0 must have length {model.input_dim}")
    hull = clarke_generators(model, x0)
    check = _rank_or_raise(hull, mesh, f"Clarke Jacobian of {model.label} at x0")
    delta = check.delta.delta
    cal = calibrate_radius(model, x0, delta, r_max, budget=budget, seed=seed, hull=hull)
    est = lipschitz_upper(model, Ball(x0, cal.r))
    computed = {
        "K": est.sharp,
        "K_frobenius": est.frobenius,
        "delta": delta,
        "delta_method": check.delta.method,
        "delta_slack": check.delta.slack,
        "r": cal.r,
        "r_mode": cal.mode,
        "generators": hull.size,
    }
    exact = hull.exactness == EXACT and cal.mode == "exact"
    return InverseCertificate.from_constants(
        x0, evaluate(model, x0),
        K=overrides.get("K", est.sharp),
        delta=overrides.get("delta", delta),
        r=overrides.get("r", cal.r),
        provenance=convention,
        exactness=EXACT if exact else HEURISTIC,
        computed=computed, overrides=overrides,
        notes=_override_notes(computed, overrides),
    )


@dataclass(frozen=True)
class ImplicitCertificate:
    """``g`` on ``U0 = B(x0, U0_radius)`` with ``F(x, g(x)) = 0`` and ``L(g) <= Lg_bound``."""

    x0: tuple[float, ...]
    y0: tuple[float, ...]
    m: int
    n: int
    K: float
    delta: float
    inner_delta: float
    r: float
    U0_radius: float
    Lg_bound: float
    sigma2: float
    exactness: str
    provenance: str = SHARP
    computed: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "type": "implicit_certificate",
            "x0": list(self.x0),
            "y0": list(self.y0),
            "m": self.m,
            "n": self.n,
            "K": self.K,
            "delta": self.delta,
            "inner_delta": self.inner_delta,
            "r": self.r,
            "U0_radius": self.U0_radius,
            "Lg_bound": self.Lg_bound,
            "sigma2": self.sigma2,
            "exactness": self.exactness,
            "provenance": self.provenance,
            "computed": self.computed,
            "notes": list(self.notes),
        }


def implicit_delta(m: int, n: int, K: float, sigma2: float) -> float:
    """``1/2 * (m + (1 + m K^2) n ||M2^-1||^2)^(-1/2)`` at ``||M2^-1|| = 1/sigma2``."""
    return 0.5 / math.sqrt(m + (1.0 + m * K * K) * n / (sigma2 * sigma2))


def block_hull(full: MatrixHull, m: int) -> MatrixHull:
    """Hull of ``[[I_m, 0], [M1, M2]]`` over the generators ``[M1 M2]`` of ``full``."""
    n = full.shape[0]
    top = np.hstack([np.eye(m), np.zeros((m, n))])
    gens = tuple(np.vstack([top, g]) for g in full.generators)
    return MatrixHull(gens, full.exactness, f"block({full.label})")


def certify_implicit(F: FunctionModel, x0, y0, r_max: float = 1.0, K: float | None = None,
                     mesh: float = DEFAULT_MESH, budget: int = 256,
                     seed: int = 0) -> ImplicitCertificate:
    """Certified implicit function ``y = g(x)`` solving ``F(x, y) = 0`` near ``(x0, y0)``.

    ``K`` overrides the computed Lipschitz constant of ``F`` (recorded as
    paper-convention provenance).
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    y0 = np.asarray(y0, dtype=float).reshape(-1)
    m, n = x0.size, y0.size
    if F.input_dim != m + n or F.output_dim != n:
        raise DimensionError(
            f"F maps R^{F.input_dim} -> R^{F.output_dim}; expected R^{m + n} -> R^{n}"
        )
    p0 = np.concatenate([x0, y0])
    resid = float(np.linalg.norm(evaluate(F, p0)))
    if resid > ZERO_RESIDUAL:
        raise PreconditionError(f"F(x0, y0) has norm {resid:.3g}, expected 0")
    full = clarke_generators(F, p0)
    d2 = full.columns(m, label=f"d2({F.label})")
    check = _rank_or_raise(d2, mesh, "partial Clarke Jacobian in y")
    sigma2 = 2.0 * check.delta.delta
    est = lipschitz_upper(F, Ball(p0, r_max))
    K_used = est.sharp if K is None else float(K)
    if not K_used > 0:
        raise DegenerateMapError("Lipschitz constant of F is zero")
    delta = implicit_delta(m, n, K_used, sigma2)
    inner = delta_of_hull(block_hull(full, m), mesh)
    cal = calibrate_radius(F, p0, delta, r_max, budget=budget, seed=seed, hull=full)
    notes = []
    if K is not None and not math.isclose(K_used, est.sharp, rel_tol=1e-12):
        notes.append(f"override K = {K_used:.12g} differs from computed K = {est.sharp:.12g}")
    if inner.delta < delta:
        notes.append(f"certified inner delta {inner.delta:.6g} below delta {delta:.6g}: "
                     "branch-and-bound bound is loose")
    exact = full.exactness == EXACT and cal.mode == "exact"
    return ImplicitCertificate(
        x0=_vec(x0), y0=_vec(y0), m=m, n=n, K=K_used, delta=delta,
        inner_delta=inner.delta, r=cal.r,
        U0_radius=cal.r * delta / (2.0 * (K_used + 1.0)),
        Lg_bound=K_used / sigma2, sigma2=sigma2,
        exactness=EXACT if exact else HEURISTIC,
        provenance=SHARP if K is None else PAPER,
        computed={
            "K": est.sharp,
            "K_frobenius": est.frobenius,
            "sigma2_method": check.delta.method,
            "inner_delta_method": inner.method,
            "inner_delta_slack": inner.slack,
            "r_mode": cal.mode,
            "generators": full.size,
        },
        notes=tuple(notes),
    )


@dataclass(frozen=True)
class PerturbationReport:
    K: float
    K_prime: float
    L: float
    admissible: bool
    maximal_rank: bool
    containment_error: float
    certificate: InverseCertificate | None = None
    witness: dict | None = None
    computed_delta: float | None = None
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "type": "perturbation_report",
            "K": self.K,
            "K_prime": self.K_prime,
            "L": self.L,
            "margin": self.K - self.L,
            "admissible": self.admissible,
            "maximal_rank": self.maximal_rank,
            "containment_error": self.containment_error,
            "computed_delta": self.computed_delta,
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "witness": self.witness,
            "notes": list(self.notes),
        }


def perturbation_check(f0: FunctionModel, h: FunctionModel, x0, r_max: float = 1.0,
                       convention: str = SHARP, overrides: Mapping | None = None,
                       mesh: float = DEFAULT_MESH, budget: int = 256,
                       seed: int = 0) -> PerturbationReport:
    """Decide whether ``f0 + h`` stays certifiably invertible (``L(h) < K``).

    In paper-convention mode the U radius uses ``K' + L``; in sharp mode it
    uses the Lipschitz bound of ``f0 + h`` itself, which never exceeds it.
    """
    overrides = _check_convention(convention, overrides)
    if not f0.is_square:
        raise DimensionError("f0 must be square")
    if (h.input_dim, h.output_dim) != (f0.input_dim, f0.output_dim):
        raise DimensionError("h must have the same shape as f0")
    x0 = np.asarray(x0, dtype=float)
    region = Ball(x0, r_max)
    K = bilipschitz_lower(f0, region, mesh)
    K_prime = lipschitz_upper(f0, region).sharp
    L = lipschitz_upper(h, region).sharp
    admissible = L < K

    f = add_models(f0, h, label=f"{f0.label}+{h.label}")
    hull_f = clarke_generators(f, x0)
    hull_sum = clarke_generators(f0, x0).minkowski_sum(clarke_generators(h, x0))
    containment = max(dist_to_hull(g, hull_sum) for g in hull_f.generators)
    notes = []
    if containment > CONTAINMENT_TOL:
        notes.append(f"Clarke Jacobian of f0 + h leaves the Minkowski sum by {containment:.3g}")
    check = maximal_rank_check(hull_f, mesh)
    witness = witness_of(hull_f, check)

    cert = None
    if not admissible:
        notes.append(f"L = {L:.12g} >= K = {K:.12g}: perturbation not admissible")
    elif check.maximal:
        if convention == PAPER:
            overrides.setdefault("K", K_prime + L)
        cert = certify_inverse(f, x0, r_max, convention, overrides, mesh, budget, seed)
        notes.extend(cert.notes)
    return PerturbationReport(
        K=K, K_prime=K_prime, L=L, admissible=admissible, maximal_rank=check.maximal,
        containment_error=containment, certificate=cert, witness=witness,
        computed_delta=check.delta.delta, notes=tuple(notes),
    )


def openness_margin(f0: FunctionModel, x0, r_max: float = 1.0,
                    mesh: float = DEFAULT_MESH) -> float:
    """Radius, in the ``L(.)`` norm, of a ball of perturbations kept invertible."""
    K = bilipschitz_lower(f0, Ball(np.asarray(x0, dtype=float), r_max), mesh)
    if not K > 0:
        raise DegenerateMapError("no openness margin: bi-Lipschitz lower constant is 0")
    return K
