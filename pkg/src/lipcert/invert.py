"""Numerical evaluation of certified inverse and implicit functions.

The solver is a damped generalized Newton iteration: at each step one
generator of the Clarke Jacobian at the current point (the +1 branch at
active kinks) is inverted, and the step is halved until the residual drops.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .certify import ImplicitCertificate, InverseCertificate
from .errors import ConvergenceError, DimensionError, PreconditionError
from .expr import FunctionModel, extended_model
from .funcspec import branch_jacobian, evaluate, kink_signature, uniform_in_ball

TOL_SOLVE = 1e-10
TOL_VAL = 1e-9
MAX_ITER = 200
MAX_HALVINGS = 30
DOMAIN_RTOL = 1e-12


@dataclass
class SolveTrace:
    iterations: int = 0
    residual_norms: list[float] = field(default_factory=list)
    piece_switches: int = 0
    converged: bool = False

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual_norms": list(self.residual_norms),
            "piece_switches": self.piece_switches,
            "converged": self.converged,
        }


def damped_newton(model: FunctionModel, target, start, tol: float = TOL_SOLVE,
                  max_iter: int = MAX_ITER) -> tuple[np.ndarray, SolveTrace]:
    """Solve ``model(x) = target`` from ``start``; raises ConvergenceError on failure."""
    target = np.asarray(target, dtype=float)
    x = np.array(start, dtype=float)
    r = evaluate(model, x) - target
    res = float(np.linalg.norm(r))
    trace = SolveTrace(residual_norms=[res])
    signs = kink_signature(model, x).signs
    while res > tol:
        if trace.iterations >= max_iter:
            raise ConvergenceError(f"no convergence in {max_iter} iterations "
                                   f"(residual {res:.3g})", trace, target)
        M = branch_jacobian(model, x)
        try:
            step = np.linalg.solve(M, r)
        except np.linalg.LinAlgError:
            raise ConvergenceError("singular generator met during the solve", trace, target)
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            xn = x - t * step
            rn = evaluate(model, xn) - target
            resn = float(np.linalg.norm(rn))
            if resn < res:
                break
            t *= 0.5
        else:
            raise ConvergenceError("line search failed to reduce the residual", trace, target)
        trace.iterations += 1
        new_signs = kink_signature(model, xn).signs
        if new_signs != signs:
            trace.piece_switches += 1
            signs = new_signs
        x, r, res = xn, rn, resn
        trace.residual_norms.append(res)
    trace.converged = True
    return x, trace


def local_invert(model: FunctionModel, cert: InverseCertificate, y,
                 tol_solve: float = TOL_SOLVE) -> tuple[np.ndarray, SolveTrace]:
    """``g(y)``: the preimage of ``y`` near ``cert.x0`` for ``y`` in ``V``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (model.output_dim,):
        raise DimensionError(f"y must have length {model.output_dim}")
    dist = float(np.linalg.norm(y - np.asarray(cert.f_x0)))
    if dist > cert.V_radius * (1.0 + DOMAIN_RTOL):
        raise PreconditionError(f"y lies {dist:.6g} from f(x0), outside V "
                                f"(radius {cert.V_radius:.6g})")
    return damped_newton(model, y, cert.x0, tol_solve)


def implicit_solve(F: FunctionModel, cert: ImplicitCertificate, x,
                   tol_solve: float = TOL_SOLVE) -> tuple[np.ndarray, SolveTrace]:
    """``g(x)`` with ``F(x, g(x)) = 0``, via the extended map ``(x, y) -> (x, F(x, y))``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != cert.m:
        raise DimensionError(f"x must have length {cert.m}")
    dist = float(np.linalg.norm(x - np.asarray(cert.x0)))
    if dist > cert.U0_radius * (1.0 + DOMAIN_RTOL):
        raise PreconditionError(f"x lies {dist:.6g} from x0, outside U0 "
                                f"(radius {cert.U0_radius:.6g})")
    ext = extended_model(F, cert.m)
    target = np.concatenate([x, np.zeros(cert.n)])
    sol, trace = damped_newton(ext, target, np.concatenate([cert.x0, cert.y0]), tol_solve)
    return sol[cert.m:], trace


@dataclass
class ValidationReport:
    samples: int
    max_g_ratio: float
    max_roundtrip_residual: float
    bound_Lg: float
    passed: bool
    max_forward_excess: float = 0.0
    max_containment_excess: float = 0.0
    failure: dict | None = None

    def to_dict(self) -> dict:
        return {
            "type": "validation_report",
            "samples": self.samples,
            "max_g_ratio": self.max_g_ratio,
            "max_roundtrip_residual": self.max_roundtrip_residual,
            "bound_Lg": self.bound_Lg,
            "pass": self.passed,
            "max_forward_excess": self.max_forward_excess,
            "max_containment_excess": self.max_containment_excess,
            "failure": self.failure,
        }


def max_pairwise_ratio(inputs: np.ndarray, outputs: np.ndarray, floor: float = 1e-12) -> float:
    """``max ||out_i - out_j|| / ||in_i - in_j||`` over all pairs with distinct inputs."""
    din = np.linalg.norm(inputs[:, None, :] - inputs[None, :, :], axis=-1)
    dout = np.linalg.norm(outputs[:, None, :] - outputs[None, :, :], axis=-1)
    mask = din > floor
    return float(np.max(dout[mask] / din[mask])) if mask.any() else 0.0


def validate_certificate(model: FunctionModel, cert: InverseCertificate, samples: int,
                         seed: int = 0, tol_solve: float = TOL_SOLVE,
                         tol_val: float = TOL_VAL) -> ValidationReport:
    """Sample ``V`` and ``U`` and check both round trips and the bound ``L(g) <= Lg``."""
    if samples < 2:
        raise ValueError("need at least two samples")
    n = model.input_dim
    rng = np.random.default_rng(seed)
    x0 = np.asarray(cert.x0)
    fx0 = np.asarray(cert.f_x0)
    vs = fx0 + cert.V_radius * uniform_in_ball(rng, n, samples)
    us_in_U = x0 + cert.U_radius * uniform_in_ball(rng, n, samples)

    gs = np.empty_like(vs)
    worst_rt = 0.0
    containment = 0.0
    for i, v in enumerate(vs):
        try:
            gs[i], _ = local_invert(model, cert, v, tol_solve)
        except ConvergenceError as exc:
            return _failed(samples, cert.Lg, {"v": v.tolist(), "reason": str(exc)})
        worst_rt = max(worst_rt, float(np.linalg.norm(evaluate(model, gs[i]) - v)))
        reach = cert.Lg * float(np.linalg.norm(v - fx0)) + tol_solve * cert.Lg
        containment = max(containment, float(np.linalg.norm(gs[i] - x0)) - reach)

    forward = 0.0
    for u in us_in_U:
        fu = evaluate(model, u)
        excess = float(np.linalg.norm(fu - fx0)) - cert.V_radius
        forward = max(forward, excess)
        if excess > 0:
            continue  # f(U) must lie in V; reported through max_forward_excess
        try:
            gu, _ = local_invert(model, cert, fu, tol_solve)
        except ConvergenceError as exc:
            return _failed(samples, cert.Lg, {"u": u.tolist(), "reason": str(exc)})
        worst_rt = max(worst_rt, float(np.linalg.norm(gu - u)))

    ratio = max_pairwise_ratio(vs, gs)
    passed = (ratio <= cert.Lg + tol_val and worst_rt <= tol_solve
              and forward <= tol_val and containment <= tol_val)
    return ValidationReport(samples, ratio, worst_rt, cert.Lg, passed,
                            max_forward_excess=max(forward, 0.0),
                            max_containment_excess=max(containment, 0.0))


def validate_implicit(F: FunctionModel, cert: ImplicitCertificate, samples: int,
                      seed: int = 0, tol_solve: float = TOL_SOLVE,
                      tol_val: float = TOL_VAL) -> ValidationReport:
    """Sample ``U0`` and check ``F(x, g(x)) = 0`` and ``L(g) <= Lg_bound``."""
    if samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    xs = np.asarray(cert.x0) + cert.U0_radius * uniform_in_ball(rng, cert.m, samples)
    ys = np.empty((samples, cert.n))
    worst = 0.0
    for i, x in enumerate(xs):
        try:
            ys[i], _ = implicit_solve(F, cert, x, tol_solve)
        except ConvergenceError as exc:
            return _failed(samples, cert.Lg_bound, {"x": x.tolist(), "reason": str(exc)})
        worst = max(worst, float(np.linalg.norm(evaluate(F, np.concatenate([x, ys[i]])))))
    ratio = max_pairwise_ratio(xs, ys)
    passed = ratio <= cert.Lg_bound + tol_val and worst <= tol_solve
    return ValidationReport(samples, ratio, worst, cert.Lg_bound, passed)


def _failed(samples: int, bound: float, failure: dict) -> ValidationReport:
    return ValidationReport(samples, float("nan"), float("nan"), bound, False, failure=failure)
