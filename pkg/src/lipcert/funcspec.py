"""Evaluation, Clarke generators and Lipschitz bounds for expression models.

Abs nodes are identified by their pre-order position over the components
(see :func:`lipcert.expr.walk`). A *sign pattern* assigns +1 or -1 to every
abs node; for a piecewise-affine model the Jacobian is constant on each
pattern's region.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, GeneratorOverflowError, SamplingError
from .expr import Abs, Const, Diff, FunctionModel, Node, Prod, Scale, Sum, Var
from .hull import EXACT, HEURISTIC, MatrixHull
from .linalg_bounds import frobenius_norm, op_norm

ACTIVE_KINK_RTOL = 1e-12
MAX_ACTIVE_KINKS = 12
REJECTION_FACTOR = 100


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        if not np.all(np.isfinite(c)):
            raise ValueError("ball center must be finite")
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.size


@dataclass(frozen=True)
class KinkSignature:
    """Active abs nodes at a point, plus the sign of every inactive one.

    ``signs[k]`` is 0 exactly when ``k`` is in ``active``.
    """

    active: tuple[int, ...]
    signs: tuple[int, ...]


def _point(model: FunctionModel, point) -> np.ndarray:
    x = np.asarray(point, dtype=float)
    if x.shape[-1:] != (model.input_dim,):
        raise DimensionError(
            f"{model.label} takes {model.input_dim} inputs, got point of shape {x.shape}"
        )
    return x


# -- plain and forward-mode evaluation --------------------------------------


def _value(node: Node, x: np.ndarray, args: list | None):
    if isinstance(node, Const):
        return node.value + 0.0 * x[..., 0]
    if isinstance(node, Var):
        return x[..., node.index]
    if isinstance(node, Sum):
        out = _value(node.children[0], x, args)
        for c in node.children[1:]:
            out = out + _value(c, x, args)
        return out
    if isinstance(node, Diff):
        return _value(node.left, x, args) - _value(node.right, x, args)
    if isinstance(node, Prod):
        return _value(node.left, x, args) * _value(node.right, x, args)
    if isinstance(node, Scale):
        return node.factor * _value(node.child, x, args)
    # pre-order: reserve the slot before descending
    slot = None
    if args is not None:
        slot = len(args)
        args.append(None)
    v = _value(node.child, x, args)
    if slot is not None:
        args[slot] = v
    return np.abs(v)


def evaluate(model: FunctionModel, point) -> np.ndarray:
    """Evaluate at one point (shape ``(m,)``) or a batch (shape ``(N, m)``)."""
    x = _point(model, point)
    return np.stack([_value(c, x, None) for c in model.components], axis=-1)


def abs_arguments(model: FunctionModel, point) -> np.ndarray:
    """Values of every abs argument at ``point``, in pre-order."""
    x = _point(model, point)
    args: list = []
    for c in model.components:
        _value(c, x, args)
    return np.array(args, dtype=float).reshape(len(args), *x.shape[:-1])


def _active_threshold(x: np.ndarray) -> np.ndarray:
    return ACTIVE_KINK_RTOL * (1.0 + np.max(np.abs(x), axis=-1))


def kink_signature(model: FunctionModel, point) -> KinkSignature:
    x = _point(model, point)
    if x.ndim != 1:
        raise DimensionError("kink_signature takes a single point")
    args = abs_arguments(model, x)
    thr = _active_threshold(x)
    active = tuple(int(k) for k in np.flatnonzero(np.abs(args) <= thr))
    signs = tuple(0 if abs(a) <= thr else (1 if a > 0 else -1) for a in args)
    return KinkSignature(active, signs)


SignChoice = Callable[[int, float], float]


def _forward(node: Node, x: np.ndarray, choose: SignChoice, counter: list):
    """(value, gradient) with abs derivatives supplied by ``choose(k, arg)``."""
    m = x.size
    if isinstance(node, Const):
        return node.value, np.zeros(m)
    if isinstance(node, Var):
        g = np.zeros(m)
        g[node.index] = 1.0
        return x[node.index], g
    if isinstance(node, Sum):
        v, g = _forward(node.children[0], x, choose, counter)
        g = g.copy()
        for c in node.children[1:]:
            cv, cg = _forward(c, x, choose, counter)
            v += cv
            g += cg
        return v, g
    if isinstance(node, Diff):
        lv, lg = _forward(node.left, x, choose, counter)
        rv, rg = _forward(node.right, x, choose, counter)
        return lv - rv, lg - rg
    if isinstance(node, Prod):
        lv, lg = _forward(node.left, x, choose, counter)
        rv, rg = _forward(node.right, x, choose, counter)
        return lv * rv, rv * lg + lv * rg
    if isinstance(node, Scale):
        v, g = _forward(node.child, x, choose, counter)
        return node.factor * v, node.factor * g
    k = counter[0]
    counter[0] += 1
    v, g = _forward(node.child, x, choose, counter)
    s = choose(k, v)
    return abs(v), s * g


def jacobian_with(model: FunctionModel, point, choose: SignChoice) -> np.ndarray:
    x = _point(model, point)
    counter = [0]
    rows = [_forward(c, x, choose, counter)[1] for c in model.components]
    return np.array(rows)


def pattern_jacobian(model: FunctionModel, point, pattern: Sequence[int]) -> np.ndarray:
    """Jacobian with every abs derivative fixed by ``pattern``."""
    return jacobian_with(model, point, lambda k, v: float(pattern[k]))


def branch_jacobian(model: FunctionModel, point) -> np.ndarray:
    """Jacobian using the actual sign at inactive kinks and +1 at active ones."""
    sig = kink_signature(model, point)
    return jacobian_with(model, point, lambda k, v: float(sig.signs[k] or 1))


def _enumerate_signs(free: Sequence[int], fixed: Sequence[int]):
    """All sign vectors agreeing with ``fixed`` (0 = free) over the free slots."""
    if len(free) > MAX_ACTIVE_KINKS:
        raise GeneratorOverflowError(
            f"{len(free)} simultaneous kinks exceed the cap of {MAX_ACTIVE_KINKS} "
            f"({2 ** MAX_ACTIVE_KINKS} generators)"
        )
    base = list(fixed)
    for choice in itertools.product((-1, 1), repeat=len(free)):
        pat = base.copy()
        for k, s in zip(free, choice):
            pat[k] = s
        yield tuple(pat)


def clarke_generators(model: FunctionModel, point, label: str = "") -> MatrixHull:
    """Generators of the Clarke generalized Jacobian at ``point``.

    Each active kink takes both derivative signs, inactive kinks keep their
    sign. When active kinks interact (nested or linearly dependent
    arguments) the result may be a superset of the Clarke Jacobian, which is
    the conservative side for every certificate built on it.
    """
    x = _point(model, point)
    sig = kink_signature(model, x)
    gens = [pattern_jacobian(model, x, pat) for pat in _enumerate_signs(sig.active, sig.signs)]
    exactness = EXACT if model.is_affine else HEURISTIC
    return MatrixHull(tuple(gens), exactness, label or f"clarke({model.label})")


# -- enclosures over a ball -------------------------------------------------


def _affine_form(node: Node, c: np.ndarray, r: float, status: list):
    """Enclose ``node`` on the ball as ``b + a.(x - c) + [-e, e]``.

    Appends, per abs node in pre-order, +1/-1 when the argument keeps its
    sign on the closed ball and 0 when it may vanish there.
    """
    m = c.size
    if isinstance(node, Const):
        return node.value, np.zeros(m), 0.0
    if isinstance(node, Var):
        a = np.zeros(m)
        a[node.index] = 1.0
        return c[node.index], a, 0.0
    if isinstance(node, Sum):
        b, a, e = _affine_form(node.children[0], c, r, status)
        a = a.copy()
        for ch in node.children[1:]:
            cb, ca, ce = _affine_form(ch, c, r, status)
            b, a, e = b + cb, a + ca, e + ce
        return b, a, e
    if isinstance(node, Diff):
        lb, la, le = _affine_form(node.left, c, r, status)
        rb, ra, re_ = _affine_form(node.right, c, r, status)
        return lb - rb, la - ra, le + re_
    if isinstance(node, Scale):
        b, a, e = _affine_form(node.child, c, r, status)
        return node.factor * b, node.factor * a, abs(node.factor) * e
    if isinstance(node, Prod):
        lb, la, le = _affine_form(node.left, c, r, status)
        rb, ra, re_ = _affine_form(node.right, c, r, status)
        lrad = float(np.linalg.norm(la)) * r + le
        rrad = float(np.linalg.norm(ra)) * r + re_
        err = lrad * rrad + abs(lb) * re_ + abs(rb) * le
        return lb * rb, lb * ra + rb * la, err
    slot = len(status)
    status.append(0)
    b, a, e = _affine_form(node.child, c, r, status)
    rad = float(np.linalg.norm(a)) * r + e
    lo, hi = b - rad, b + rad
    tol = ACTIVE_KINK_RTOL * (1.0 + float(np.max(np.abs(c))) + r)
    if lo > tol:
        status[slot] = 1
        return b, a, e
    if hi < -tol:
        status[slot] = -1
        return -b, -a, e
    top = max(abs(lo), abs(hi))
    return top / 2.0, np.zeros(m), top / 2.0


def region_sign_status(model: FunctionModel, region: Ball) -> tuple[int, ...]:
    """Per abs node: its fixed sign on the region, or 0 if it may change sign."""
    c = _point(model, region.center)
    status: list = []
    for comp in model.components:
        _affine_form(comp, c, region.radius, status)
    return tuple(status)


def region_patterns(model: FunctionModel, region: Ball) -> list[tuple[int, ...]]:
    """Sign patterns whose pieces may meet the region (a superset when abs nodes nest)."""
    status = region_sign_status(model, region)
    free = [k for k, s in enumerate(status) if s == 0]
    return list(_enumerate_signs(free, status))


def _interval_forward(node: Node, lo: np.ndarray, hi: np.ndarray, pattern, counter):
    """Interval value and gradient enclosures on the box ``[lo, hi]``."""
    m = lo.size
    if isinstance(node, Const):
        z = np.zeros(m)
        return node.value, node.value, z, z.copy()
    if isinstance(node, Var):
        g = np.zeros(m)
        g[node.index] = 1.0
        return lo[node.index], hi[node.index], g, g.copy()
    if isinstance(node, Sum):
        vl, vh, gl, gh = _interval_forward(node.children[0], lo, hi, pattern, counter)
        gl, gh = gl.copy(), gh.copy()
        for ch in node.children[1:]:
            a, b, cl, ch_ = _interval_forward(ch, lo, hi, pattern, counter)
            vl, vh, gl, gh = vl + a, vh + b, gl + cl, gh + ch_
        return vl, vh, gl, gh
    if isinstance(node, Diff):
        a, b, al, ah = _interval_forward(node.left, lo, hi, pattern, counter)
        c, d, cl, ch = _interval_forward(node.right, lo, hi, pattern, counter)
        return a - d, b - c, al - ch, ah - cl
    if isinstance(node, Scale):
        a, b, gl, gh = _interval_forward(node.child, lo, hi, pattern, counter)
        f = node.factor
        if f >= 0:
            return f * a, f * b, f * gl, f * gh
        return f * b, f * a, f * gh, f * gl
    if isinstance(node, Prod):
        a, b, al, ah = _interval_forward(node.left, lo, hi, pattern, counter)
        c, d, cl, ch = _interval_forward(node.right, lo, hi, pattern, counter)
        prods = (a * c, a * d, b * c, b * d)
        # d(uv) = u'v + uv'
        t1 = np.stack([al * c, al * d, ah * c, ah * d])
        t2 = np.stack([a * cl, a * ch, b * cl, b * ch])
        return (min(prods), max(prods), t1.min(0) + t2.min(0), t1.max(0) + t2.max(0))
    k = counter[0]
    counter[0] += 1
    a, b, gl, gh = _interval_forward(node.child, lo, hi, pattern, counter)
    if a >= 0:
        vl, vh = a, b
    elif b <= 0:
        vl, vh = -b, -a
    else:
        vl, vh = 0.0, max(-a, b)
    if pattern[k] > 0:
        return vl, vh, gl, gh
    return vl, vh, -gh, -gl


def pattern_jacobian_bound(model: FunctionModel, region: Ball, pattern) -> np.ndarray:
    """Entrywise bound on |J| over the region for one sign pattern."""
    lo = region.center - region.radius
    hi = region.center + region.radius
    counter = [0]
    rows = []
    for comp in model.components:
        _, _, gl, gh = _interval_forward(comp, lo, hi, pattern, counter)
        rows.append(np.maximum(np.abs(gl), np.abs(gh)))
    return np.array(rows)


def region_jacobians(model: FunctionModel, region: Ball) -> list[np.ndarray]:
    """One Jacobian (affine models) or |J| bound (otherwise) per region pattern."""
    pats = region_patterns(model, region)
    if model.is_affine:
        return [pattern_jacobian(model, region.center, p) for p in pats]
    return [pattern_jacobian_bound(model, region, p) for p in pats]


@dataclass(frozen=True)
class LipschitzEstimate:
    """Upper bounds on L(f) over a region.

    ``sharp`` is the maximum operator norm over the pieces meeting the
    region; ``frobenius`` is the cruder maximum Frobenius norm. ``exact``
    says the sharp value is attained by a piece Jacobian (affine models);
    otherwise it comes from interval Jacobian enclosures.
    """

    sharp: float
    frobenius: float
    exact: bool

    def to_dict(self) -> dict:
        return {"sharp": self.sharp, "frobenius": self.frobenius, "exact": self.exact}


def lipschitz_upper(model: FunctionModel, region: Ball) -> LipschitzEstimate:
    if region.dim != model.input_dim:
        raise DimensionError("region dimension does not match model input dimension")
    mats = region_jacobians(model, region)
    sharp = max(op_norm(j) for j in mats)
    frob = max(frobenius_norm(j) for j in mats)
    return LipschitzEstimate(sharp, frob, model.is_affine)


def region_hull(model: FunctionModel, region: Ball) -> MatrixHull:
    """Hull of every piece Jacobian meeting the region.

    By the mean-value inclusion, ``f(x) - f(y) = M (x - y)`` for some ``M``
    in this hull whenever ``x, y`` lie in the (convex) region.
    """
    if not model.is_affine:
        raise ValueError("region_hull needs a piecewise-affine model")
    gens = [pattern_jacobian(model, region.center, p) for p in region_patterns(model, region)]
    return MatrixHull(tuple(gens), EXACT, f"pieces({model.label})")


def bilipschitz_lower(model: FunctionModel, region: Ball, mesh: float = 1e-2) -> float:
    """Lower bound on ``inf ||f(x) - f(y)|| / ||x - y||`` over the region.

    For piecewise-affine models this is the certified infimum of the
    smallest singular value over the hull of piece Jacobians. The minimum
    over the pieces alone is not a bound: a map that folds (slopes of
    opposite sign) is not injective even though every piece is. For models
    with products the value is a heuristic taken from sampled Jacobians.
    """
    from .genjac import delta_of_hull

    if not model.is_square:
        raise DimensionError("bilipschitz_lower needs a square model")
    if region.dim != model.input_dim:
        raise DimensionError("region dimension does not match model input dimension")
    if model.is_affine:
        hull = region_hull(model, region)
    else:
        mats = sample_jacobians(model, region, 64, seed=0)
        mats += list(clarke_generators(model, region.center).generators)
        hull = MatrixHull(tuple(mats), HEURISTIC, f"sampled({model.label})")
    return 2.0 * delta_of_hull(hull, mesh).delta


def sample_jacobians(model: FunctionModel, region: Ball, count: int, seed: int) -> list[np.ndarray]:
    """Jacobians at ``count`` uniform random differentiable points of the region."""
    if count < 1:
        raise ValueError("count must be at least 1")
    m = model.input_dim
    if region.dim != m:
        raise DimensionError("region dimension does not match model input dimension")
    rng = np.random.default_rng(seed)
    out: list[np.ndarray] = []
    budget = REJECTION_FACTOR * count
    tries = 0
    while len(out) < count:
        if tries >= budget:
            raise SamplingError(
                f"only {len(out)} of {count} differentiable points after {budget} draws"
            )
        tries += 1
        x = region.center + region.radius * uniform_in_ball(rng, m)
        sig = kink_signature(model, x)
        if sig.active:
            continue
        out.append(jacobian_with(model, x, lambda k, v: float(sig.signs[k])))
    return out


def uniform_in_ball(rng: np.random.Generator, dim: int, size: int | None = None) -> np.ndarray:
    """Uniform samples from the closed unit ball."""
    shape = (dim,) if size is None else (size, dim)
    g = rng.standard_normal(shape)
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    u = rng.random(() if size is None else (size, 1))
    return g * u ** (1.0 / dim)
