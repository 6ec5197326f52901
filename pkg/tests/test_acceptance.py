"""Acceptance criteria, one check per criterion.

Run under pytest, or directly (``python3 tests/test_acceptance.py``) to get
one PASS/FAIL line per criterion.
"""

from __future__ import annotations

import math
import sys
import time

import numpy as np
import pytest

from lipcert.certify import PAPER, certify_implicit, certify_inverse, perturbation_check
from lipcert.expr import parse_function
from lipcert.funcspec import clarke_generators, uniform_in_ball
from lipcert.genjac import delta_of_hull, maximal_rank_check, separation_witness
from lipcert.hull import MatrixHull
from lipcert.invert import implicit_solve, max_pairwise_ratio, validate_certificate
from lipcert.linalg_bounds import neumann_inverse, op_norm
from lipcert.scenarios import EXAMPLE1_K, EXAMPLE2_CASE1_OVERRIDES, model

EX1 = model("example1_F")
F0 = model("example2_f0")
H_SMALL = model("example2_h_small")
H_LARGE = model("example2_h_large")
CASE1 = parse_function("f(x, y) = (abs(x) + 2*x + 0.5*abs(x), abs(y) + 2*y + 0.5*abs(y))")
DIAG23 = parse_function("f(x, y) = (2*x, 3*y)")

ROOT6 = math.sqrt(6.0)
DELTA_EX1 = 1.0 / math.sqrt(54.0)
U0_EX1 = (1.0 / (6.0 * ROOT6)) * (1.0 / (1.0 + 2.0 * ROOT6))


def diag_box(lo, hi, shift=2.0):
    return MatrixHull.of([np.diag([s + shift, t + shift]) for s in (lo, hi) for t in (lo, hi)])


def reference_hulls() -> dict[str, MatrixHull]:
    full = clarke_generators(EX1, np.zeros(3))
    top = np.hstack([np.eye(1), np.zeros((1, 2))])
    return {
        "base": clarke_generators(F0, [0.0, 0.0]),
        "s,t in [-1,1]": diag_box(-1, 1),
        "s,t in [-3/2,3/2]": diag_box(-1.5, 1.5),
        "s,t in [-5/2,5/2]": diag_box(-2.5, 2.5),
        "partial in y": full.columns(1),
        "block": MatrixHull.of([np.vstack([top, g]) for g in full.generators]),
    }


def random_hulls(count=20, seed=2024) -> dict[str, MatrixHull]:
    rng = np.random.default_rng(seed)
    out = {}
    for i in range(count):
        n = 2 if i % 2 == 0 else 3
        k = int(rng.integers(2, 7))
        Q1, _ = np.linalg.qr(rng.normal(size=(n, n)))
        Q2, _ = np.linalg.qr(rng.normal(size=(n, n)))
        A0 = Q1 @ np.diag(rng.uniform(1.0, 3.0, n)) @ Q2
        amp = rng.uniform(0.1, 1.2)
        gens = [A0 + amp * rng.normal(size=(n, n)) / math.sqrt(n) for _ in range(k)]
        out[f"random-{i} ({n}x{n}, {k} gens)"] = MatrixHull.of(gens)
    return out


# -- criteria ---------------------------------------------------------------


def criterion_1():
    c = certify_implicit(EX1, [0.0], [0.0, 0.0], r_max=1.0, K=EXAMPLE1_K)
    errs = (abs(c.delta - DELTA_EX1), abs(c.U0_radius - U0_EX1), abs(c.Lg_bound - ROOT6))
    ok = max(errs) <= 1e-9
    return ok, 1.0, (f"delta={c.delta:.12g} U0={c.U0_radius:.12g} Lg_bound={c.Lg_bound:.12g} "
                     f"max err {max(errs):.1e}")


def criterion_2():
    good = maximal_rank_check(diag_box(-1, 1))
    bad_hull = diag_box(-2.5, 2.5)
    bad = maximal_rank_check(bad_hull)
    sv = None
    if bad.witness is not None:
        sv = float(np.linalg.svd(bad_hull.combination(bad.witness), compute_uv=False)[-1])
    ok = good.maximal and not bad.maximal and sv is not None and sv <= 1e-12
    return ok, 1.0, f"[-1,1] maximal={good.maximal}; [-5/2,5/2] maximal={bad.maximal}, witness sigma_min={sv}"


def criterion_3():
    small = perturbation_check(F0, H_SMALL, [0.0, 0.0])
    large = perturbation_check(F0, H_LARGE, [0.0, 0.0])
    forced = perturbation_check(F0, H_SMALL, [0.0, 0.0], convention=PAPER,
                               overrides=EXAMPLE2_CASE1_OVERRIDES)
    c = forced.certificate
    ok = (small.admissible and abs(small.L - 0.5) <= 1e-12 and abs(small.K - 1) <= 1e-12
          and not large.admissible and abs(large.L - 1.5) <= 1e-12 and large.witness is not None
          and c is not None and c.U_radius == 1 / 7 and c.V_radius == 0.5 and c.Lg == 1.0
          and forced.computed_delta == 0.25 and c.computed["delta"] == 0.25
          and c.computed["delta_method"] == "diagonal-interval")
    detail = (f"L={small.L}/{large.L} K={small.K}; forced U={c.U_radius if c else None} "
              f"V={c.V_radius if c else None} Lg={c.Lg if c else None}; "
              f"computed delta={forced.computed_delta}")
    return ok, 1.0, detail


def criterion_4():
    rng = np.random.default_rng(44)
    worst_pert = -math.inf
    for _ in range(500):
        n = int(rng.integers(2, 5))
        A = rng.normal(size=(n, n)) + n * np.eye(n)
        Ainv = np.linalg.inv(A)
        E0 = rng.normal(size=(n, n))
        r = rng.uniform(0.0, 0.99)
        E = E0 * r / op_norm(Ainv @ E0)
        dev = op_norm(np.linalg.inv(A + E) - Ainv)
        bound = op_norm(E) * op_norm(Ainv) ** 2 / (1.0 - op_norm(Ainv @ E))
        worst_pert = max(worst_pert, dev - bound)
    worst_neu = -math.inf
    worst_acc = 0.0
    for _ in range(500):
        n = int(rng.integers(2, 5))
        F = rng.normal(size=(n, n))
        F *= rng.uniform(0.0, 0.99) / op_norm(F)
        inv, bound = neumann_inverse(F)
        direct = np.linalg.inv(np.eye(n) - F)
        worst_neu = max(worst_neu, op_norm(direct) - bound)
        worst_acc = max(worst_acc, op_norm(inv - direct))
    ok = worst_pert <= 1e-9 and worst_neu <= 1e-9 and worst_acc <= 1e-9
    return ok, 5.0, (f"max bound excess: perturbed inverse {worst_pert:.3g}, "
                     f"Neumann {worst_neu:.3g}; inverse error {worst_acc:.2g}")


def _combos(rng, k, count):
    W = rng.dirichlet(np.ones(k), size=count - k)
    return np.vstack([np.eye(k), W])


def criterion_5():
    rng = np.random.default_rng(55)
    hulls = {**reference_hulls(), **random_hulls()}
    worst = math.inf
    zero = 0
    for hull in hulls.values():
        d = delta_of_hull(hull).delta
        zero += d == 0.0
        M = np.tensordot(_combos(rng, hull.size, 1000), hull.stacked(), axes=1)
        sv = np.linalg.svd(M, compute_uv=False)[:, -1]
        worst = min(worst, float(np.min(sv - 2.0 * d)))
    ok = worst >= -1e-9
    return ok, 10.0, f"{len(hulls)} hulls ({zero} with delta = 0), min sigma_min - 2 delta = {worst:.3g}"


def criterion_6():
    rng = np.random.default_rng(66)
    hulls = {**reference_hulls(), **random_hulls()}
    worst = math.inf
    used = 0
    for hull in hulls.values():
        check = maximal_rank_check(hull)
        if not check.maximal:
            continue
        used += 1
        delta = check.delta.delta
        for v in uniform_in_ball(rng, hull.shape[1], 50):
            v = v / np.linalg.norm(v)
            w = separation_witness(hull, v, delta)
            worst = min(worst, float(np.min(hull.stacked() @ v @ w)) - delta)
    ok = used > 0 and worst >= -1e-7
    return ok, 5.0, f"{used} maximal hulls x 50 directions, min w.(Mv) - delta = {worst:.3g}"


def criterion_7():
    lines = []
    ok = True
    for name, f in (("case-1 computed delta", CASE1), ("diag(2,3)", DIAG23)):
        cert = certify_inverse(f, [0.0, 0.0], 1.0)
        rep = validate_certificate(f, cert, 500, seed=7)
        good = (rep.passed and rep.max_roundtrip_residual <= 1e-10
                and rep.max_g_ratio <= cert.Lg + 1e-9)
        ok &= good
        lines.append(f"{name}: ratio {rep.max_g_ratio:.6g} <= Lg {cert.Lg:.6g}, "
                     f"residual {rep.max_roundtrip_residual:.2g}")
    return ok, 10.0, "; ".join(lines)


def criterion_8():
    cert = certify_implicit(EX1, [0.0], [0.0, 0.0], r_max=1.0, K=EXAMPLE1_K)
    rng = np.random.default_rng(88)
    xs = rng.uniform(-cert.U0_radius, cert.U0_radius, 100)
    ys = []
    worst = 0.0
    for x in xs:
        y, _ = implicit_solve(EX1, cert, [x])
        oracle = -x if x > 0 else -x / 2
        worst = max(worst, float(np.max(np.abs(y - oracle))))
        ys.append(y)
    ys = np.array(ys)
    slope = max(max_pairwise_ratio(xs[:, None], ys[:, i:i + 1]) for i in range(2))
    ratio = max_pairwise_ratio(xs[:, None], ys)
    ok = worst <= 1e-9 and slope <= cert.Lg_bound + 1e-9 and ratio <= cert.Lg_bound + 1e-9
    return ok, 5.0, (f"max |y - oracle| = {worst:.2g}; componentwise slope {slope:.6g}, "
                     f"Euclidean ratio {ratio:.6g} <= {cert.Lg_bound:.6g}")


def criterion_9():
    c = certify_implicit(EX1, [0.0], [0.0, 0.0], r_max=1.0, K=EXAMPLE1_K)
    ok = c.inner_delta >= DELTA_EX1 - 1e-9
    return ok, 1.0, f"inner delta {c.inner_delta:.6g} >= delta {DELTA_EX1:.6g}"


CRITERIA = {
    1: ("implicit certificate reproduction", criterion_1),
    2: ("maximal-rank decisions", criterion_2),
    3: ("perturbation gate", criterion_3),
    4: ("perturbation-bound property suite", criterion_4),
    5: ("delta soundness", criterion_5),
    6: ("separation-witness suite", criterion_6),
    7: ("inverse round-trip and Lipschitz validation", criterion_7),
    8: ("implicit-function oracle equivalence", criterion_8),
    9: ("inner delta dominates delta", criterion_9),
}

RESULTS: dict[int, str] = {}


def evaluate_criterion(number: int) -> tuple[bool, str]:
    title, fn = CRITERIA[number]
    t0 = time.perf_counter()
    ok, limit, detail = fn()
    elapsed = time.perf_counter() - t0
    ok = bool(ok) and elapsed < limit
    line = (f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title} | {detail} | "
            f"{elapsed:.2f}s (limit {limit:g}s)")
    RESULTS[number] = line
    return ok, line


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    ok, line = evaluate_criterion(number)
    print(line)
    assert ok, line


def main() -> int:
    failed = 0
    for number in sorted(CRITERIA):
        ok, line = evaluate_criterion(number)
        print(line)
        failed += not ok
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
