"""Geometry of generalized-Jacobian hulls.

Everything here is a certified *lower* bound or an exact computation:

* ``delta_of_hull`` lower-bounds ``inf sigma_min`` over the hull, using the
  fact that ``sigma_min`` is 1-Lipschitz in the operator norm.
* ``dist_to_hull`` and ``separation_witness`` both reduce to a minimum-norm
  point problem over a finite point set, solved with Wolfe's algorithm and
  stopped on a certified duality bracket.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CalibrationError,
    DimensionError,
    HullDistanceError,
    WitnessError,
)
from .expr import FunctionModel
from .funcspec import Ball, clarke_generators, region_jacobians, sample_jacobians
from .hull import EXACT, HEURISTIC, MatrixHull
from .linalg_bounds import TOL_LINALG, as_matrix, sigma_min

DIST_TOL = 1e-9
DIST_MAX_ITER = 100_000
TOL_SEP = 1e-7
DEFAULT_MESH = 1e-2
MAX_NODES = 40_000
R_MIN = 1e-9
BISECT_RTOL = 1e-3


# -- minimum-norm point -----------------------------------------------------


@dataclass
class MinNormResult:
    point: np.ndarray
    weights: np.ndarray
    lower: float
    upper: float
    iterations: int


def _affine_minimizer(P: np.ndarray) -> np.ndarray:
    """Weights summing to 1 that minimise ``||mu @ P||`` (affine hull of rows)."""
    k = P.shape[0]
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = P @ P.T
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    mu = sol[:k]
    return mu / mu.sum()


def min_norm_point(points, tol: float = DIST_TOL, max_iter: int = DIST_MAX_ITER) -> MinNormResult:
    """Minimum-norm point of ``conv(points)`` by Wolfe's algorithm.

    Stops when the certified bracket ``[lower, upper]`` on the minimum norm
    is narrower than ``tol``: ``upper = ||x||`` for the current hull point
    ``x`` and ``lower = min_i <x, p_i> / ||x||`` from the supporting
    hyperplane through ``x``.
    """
    P = np.asarray(points, dtype=float)
    k = P.shape[0]
    norms = np.einsum("ij,ij->i", P, P)
    first = int(np.argmin(norms))
    S = [first]
    lam = np.array([1.0])
    x = P[first].copy()
    eps = 1e-14
    lower = 0.0
    for it in range(1, max_iter + 1):
        xx = float(x @ x)
        upper = math.sqrt(xx)
        dots = P @ x
        j = int(np.argmin(dots))
        lower = max(0.0, float(dots[j]) / upper) if upper > 0 else 0.0
        if upper <= tol or upper - lower <= tol:
            break
        if j in S or xx - dots[j] <= eps * max(1.0, xx):
            break
        S.append(j)
        lam = np.append(lam, 0.0)
        while True:
            mu = _affine_minimizer(P[S])
            if np.all(mu > eps):
                lam = mu
                break
            dec = lam - mu
            mask = (mu <= eps) & (dec > 0)
            theta = float(np.min(lam[mask] / dec[mask])) if np.any(mask) else 1.0
            theta = min(max(theta, 0.0), 1.0)
            lam = theta * mu + (1.0 - theta) * lam
            keep = lam > eps
            if keep.all():
                # numerical stall: drop the smallest weight so the active set shrinks
                keep[int(np.argmin(lam))] = False
            S = [s for s, kp in zip(S, keep) if kp]
            lam = lam[keep]
            lam = lam / lam.sum()
            if len(S) == 1:
                lam = np.array([1.0])
                break
        x = lam @ P[S]
    else:
        w = np.zeros(k)
        w[S] = lam
        raise HullDistanceError(
            f"minimum-norm iteration budget {max_iter} exhausted",
            (lower, float(np.linalg.norm(x))),
        )
    w = np.zeros(k)
    w[S] = lam
    return MinNormResult(x, w, lower, float(np.linalg.norm(x)), it)


def dist_to_hull(M, hull: MatrixHull, tol: float = DIST_TOL) -> float:
    """Frobenius distance from ``M`` to ``hull`` (an upper estimate within ``tol``).

    Frobenius distance dominates operator-norm distance, so ``<= eps`` here
    implies containment in ``hull + eps * B`` for the operator-norm ball.
    """
    M = as_matrix(M)
    if M.shape != hull.shape:
        raise DimensionError(f"matrix shape {M.shape} does not match hull shape {hull.shape}")
    pts = (hull.stacked() - M).reshape(hull.size, -1)
    return min_norm_point(pts, tol).upper


def hull_weights_for(M, hull: MatrixHull, tol: float = DIST_TOL) -> tuple[np.ndarray, float]:
    """Simplex weights of the hull point closest to ``M`` and the distance."""
    M = as_matrix(M)
    pts = (hull.stacked() - M).reshape(hull.size, -1)
    res = min_norm_point(pts, tol)
    return res.weights, res.upper


# -- delta ------------------------------------------------------------------


@dataclass(frozen=True)
class DeltaCertificate:
    """``delta`` with ``sigma_min(M) >= 2 * delta`` for every hull member ``M``.

    ``slack`` is the smallest ``sigma_min`` actually observed minus
    ``2 * delta``; ``minimizing_point`` holds the weights where it was seen.
    """

    delta: float
    mesh: float
    minimizing_point: tuple[float, ...]
    slack: float
    method: str
    nodes: int = 0

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "mesh": self.mesh,
            "minimizing_point": list(self.minimizing_point),
            "slack": self.slack,
            "method": self.method,
            "nodes": self.nodes,
        }


def _is_diagonal(hull: MatrixHull) -> bool:
    G = hull.stacked()
    n = G.shape[1]
    off = ~np.eye(n, dtype=bool)
    return bool(np.all(G[:, off] == 0.0))


def _diagonal_delta(hull: MatrixHull, mesh: float) -> DeltaCertificate:
    # The projection of the hull on each diagonal entry is exactly [lo_i, hi_i],
    # and sigma_min of a diagonal matrix is its smallest |entry|.
    D = np.array([np.diag(g) for g in hull.generators])
    lo, hi = D.min(axis=0), D.max(axis=0)
    gaps = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(np.abs(lo), np.abs(hi)))
    i = int(np.argmin(gaps))
    w = np.zeros(hull.size)
    a, b = int(np.argmin(D[:, i])), int(np.argmax(D[:, i]))
    if gaps[i] == 0.0 and lo[i] < hi[i]:
        lam = hi[i] / (hi[i] - lo[i])
        w[a] += lam
        w[b] += 1.0 - lam
    else:
        w[a if abs(lo[i]) <= abs(hi[i]) else b] = 1.0
    return DeltaCertificate(float(gaps[i]) / 2.0, mesh, tuple(w), 0.0, "diagonal-interval")


@dataclass(order=True)
class _Simplex:
    lb: float
    seq: int
    W: np.ndarray = field(compare=False)
    V: np.ndarray = field(compare=False)
    sv: np.ndarray = field(compare=False)


def _det_root(wa: np.ndarray, wb: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Weights on the segment [wa, wb] where det changes sign (bisection)."""
    da = np.linalg.det(np.tensordot(wa, G, axes=1))
    for _ in range(80):
        wm = 0.5 * (wa + wb)
        dm = np.linalg.det(np.tensordot(wm, G, axes=1))
        if dm == 0.0:
            return wm
        if (dm > 0) == (da > 0):
            wa, da = wm, dm
        else:
            wb = wm
    return 0.5 * (wa + wb)


def _bnb_delta(hull: MatrixHull, mesh: float, max_nodes: int) -> DeltaCertificate:
    G = hull.stacked()
    k, scale = hull.size, max(1.0, float(np.max(np.abs(G))))
    singular = TOL_LINALG * scale

    def singular_at(w) -> DeltaCertificate:
        sv = sigma_min(np.tensordot(w, G, axes=1))
        return DeltaCertificate(0.0, mesh, tuple(w), sv, "determinant-sign-change")

    # a determinant sign change between two generators puts a singular
    # matrix on the segment joining them
    dets = np.linalg.det(G)
    if dets.min() < 0 < dets.max():
        eye = np.eye(k)
        return singular_at(_det_root(eye[int(np.argmin(dets))], eye[int(np.argmax(dets))], G))
    sign = 1.0 if dets.max() > 0 else -1.0

    best = [math.inf, None]

    def make(W, V, sv, seq):
        C = np.add.reduce(V) / V.shape[0]
        s = np.linalg.svd(np.concatenate([C[None], V - C]), compute_uv=False)
        sc = float(s[0, -1])
        rho = float(np.max(s[1:, 0]))
        # M = C + D gives M'M >= C'C + C'D + D'C; lambda_min of the right side
        # is concave in D, so its minimum over the simplex sits at a vertex
        CtV = np.swapaxes(V, 1, 2) @ C
        quad = np.linalg.eigvalsh(CtV + np.swapaxes(CtV, 1, 2) - C.T @ C)[:, 0]
        lb = max(sc - rho, math.sqrt(max(0.0, float(np.min(quad)))))
        j = int(np.argmin(sv))
        for val, wt in ((sc, np.add.reduce(W) / W.shape[0]), (float(sv[j]), W[j])):
            if val < best[0]:
                best[0], best[1] = val, wt
        return _Simplex(lb, seq, W, V, sv)

    heap = [make(np.eye(k), G.copy(), np.linalg.svd(G, compute_uv=False)[:, -1], 0)]
    nodes, seq = 1, 1
    while True:
        node = heap[0]
        if best[0] <= singular:
            lb = 0.0
            break
        if best[0] - node.lb <= mesh * best[0] or nodes >= max_nodes:
            lb = node.lb
            break
        heapq.heappop(heap)
        # longest edge in Frobenius norm
        p = node.V.shape[0]
        flat = node.V.reshape(p, -1)
        d2 = np.sum((flat[:, None, :] - flat[None, :, :]) ** 2, axis=-1)
        a, b = np.unravel_index(int(np.argmax(d2)), d2.shape)
        wm = 0.5 * (node.W[a] + node.W[b])
        vm = 0.5 * (node.V[a] + node.V[b])
        if sign * np.linalg.det(vm) <= 0:
            return singular_at(_det_root(node.W[a], wm, G))
        sm = float(np.linalg.svd(vm, compute_uv=False)[-1])
        for drop in (a, b):
            W = node.W.copy()
            V = node.V.copy()
            sv = node.sv.copy()
            W[drop], V[drop], sv[drop] = wm, vm, sm
            heapq.heappush(heap, make(W, V, sv, seq))
            seq += 1
        nodes += 2
    delta = max(0.0, lb) / 2.0
    return DeltaCertificate(delta, mesh, tuple(float(w) for w in best[1]),
                            best[0] - 2.0 * delta, "branch-and-bound", nodes)


def delta_of_hull(hull: MatrixHull, mesh: float = DEFAULT_MESH,
                  max_nodes: int = MAX_NODES) -> DeltaCertificate:
    """Certified ``delta = inf_hull sigma_min / 2`` (a lower bound in general).

    Single generators and diagonal hulls are handled exactly. Otherwise the
    weight simplex is bisected adaptively; on each sub-simplex the bound is
    the better of ``sigma_min(C) - max_vertex ||V - C||`` and a second-order
    bound from ``M'M >= C'C + C'D + D'C`` (``C`` the centroid, ``D = M - C``),
    whose smallest eigenvalue is minimised at a vertex. Refinement stops
    once the bound is within ``mesh`` (relative) of the smallest observed
    value, or the node budget runs out, in which case the bound is still
    sound and ``slack`` shows how loose it is.
    """
    if not hull.is_square:
        raise DimensionError(f"delta needs square generators, got {hull.shape}")
    if not mesh > 0:
        raise ValueError("mesh must be positive")
    if hull.size == 1:
        return DeltaCertificate(sigma_min(hull.generators[0]) / 2.0, mesh, (1.0,), 0.0, "single")
    if _is_diagonal(hull):
        return _diagonal_delta(hull, mesh)
    return _bnb_delta(hull, mesh, max_nodes)


@dataclass(frozen=True)
class RankCheck:
    maximal: bool
    delta: DeltaCertificate
    witness: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        return {
            "maximal": self.maximal,
            "delta": self.delta.to_dict(),
            "witness": None if self.witness is None else list(self.witness),
        }


def maximal_rank_check(hull: MatrixHull, mesh: float = DEFAULT_MESH) -> RankCheck:
    cert = delta_of_hull(hull, mesh)
    if cert.delta > 0:
        return RankCheck(True, cert)
    return RankCheck(False, cert, cert.minimizing_point)


# -- radius calibration -----------------------------------------------------


@dataclass(frozen=True)
class Calibration:
    r: float
    mode: str
    probes: int

    def to_dict(self) -> dict:
        return {"r": self.r, "mode": self.mode, "probes": self.probes}


def calibrate_radius(model: FunctionModel, x0, delta: float, r_max: float,
                     budget: int = 256, seed: int = 0,
                     hull: MatrixHull | None = None) -> Calibration:
    """Largest ``r <= r_max`` with every Jacobian on ``B_r(x0)`` within ``delta`` of the hull.

    Piecewise-affine models are checked exactly by enumerating every piece
    that meets the ball; other models fall back to ``budget`` sampled
    Jacobians and the result is labelled ``sampled``.
    """
    if not delta > 0:
        raise CalibrationError(f"delta must be positive, got {delta}")
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    x0 = np.asarray(x0, dtype=float)
    if hull is None:
        hull = clarke_generators(model, x0)
    exact = model.is_affine
    probes = [0]

    def ok(r: float) -> bool:
        probes[0] += 1
        ball = Ball(x0, r)
        mats = region_jacobians(model, ball) if exact else sample_jacobians(model, ball, budget, seed)
        return all(dist_to_hull(J, hull) <= delta for J in mats)

    mode = "exact" if exact else "sampled"
    if ok(r_max):
        return Calibration(r_max, mode, probes[0])
    hi = r_max
    lo = r_max / 2.0
    while not ok(lo):
        hi = lo
        lo /= 2.0
        if lo < R_MIN:
            raise CalibrationError(
                f"containment within delta={delta:.6g} fails for every r >= {R_MIN}"
            )
    while hi - lo > BISECT_RTOL * lo:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return Calibration(lo, mode, probes[0])


# -- separation -------------------------------------------------------------


def separation_witness(hull: MatrixHull, v, delta: float, tol: float = TOL_SEP) -> np.ndarray:
    """Unit ``w`` with ``w . (M v) >= delta`` for every ``M`` in the hull.

    ``w`` is the normalised minimum-norm point of ``conv{G_i v}``; the
    optimality condition ``<x, G_i v> >= ||x||^2`` gives the inequality as
    soon as ``||x|| >= delta``.
    """
    if not hull.is_square:
        raise DimensionError("separation needs square generators")
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != hull.shape[1]:
        raise DimensionError("v has the wrong length")
    nv = float(np.linalg.norm(v))
    if abs(nv - 1.0) > 1e-9:
        raise ValueError(f"v must be a unit vector, got norm {nv}")
    pts = hull.stacked() @ v
    res = min_norm_point(pts, tol=min(tol, DIST_TOL))
    if res.upper < delta - tol or res.upper == 0.0:
        raise WitnessError(
            f"conv{{M v}} comes within {res.upper:.3g} of the origin, below delta={delta:.6g}"
        )
    w = res.point / res.upper
    worst = float(np.min(pts @ w))
    if worst < delta - tol:
        raise WitnessError(f"min w.(Mv) = {worst:.6g} < delta = {delta:.6g}")
    return w


__all__ = [
    "EXACT",
    "HEURISTIC",
    "Calibration",
    "DeltaCertificate",
    "MatrixHull",
    "MinNormResult",
    "RankCheck",
    "calibrate_radius",
    "delta_of_hull",
    "dist_to_hull",
    "hull_weights_for",
    "maximal_rank_check",
    "min_norm_point",
    "separation_witness",
]
