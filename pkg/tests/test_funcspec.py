import math

import numpy as np
import pytest
from hypothesis import given, settings
from scipy.spatial.distance import pdist
from hypothesis import strategies as st

from lipcert.errors import DimensionError, GeneratorOverflowError, SamplingError
from lipcert.expr import parse_function
from lipcert.funcspec import (
    MAX_ACTIVE_KINKS,
    Ball,
    bilipschitz_lower,
    branch_jacobian,
    clarke_generators,
    evaluate,
    kink_signature,
    lipschitz_upper,
    region_jacobians,
    region_sign_status,
    sample_jacobians,
)
from lipcert.genjac import dist_to_hull
from lipcert.hull import EXACT, HEURISTIC

F0 = parse_function("f0(x, y) = (abs(x) + 2*x, abs(y) + 2*y)")
EX1 = parse_function("F(x, y, z) = (2*x + abs(y) + 3*y, 2*x + abs(z) + 3*z)")
CASE2 = parse_function("f(x, y) = (abs(x) + 2*x + 1.5*abs(x), abs(y) + 2*y + 1.5*abs(y))")
IDENT = parse_function("f(x, y) = (x, y)")
UNIT2 = Ball(np.zeros(2), 1.0)


def as_set(hull):
    return sorted(tuple(np.round(g, 12).ravel()) for g in hull.generators)


def grid_min_ratio(model, n=100):
    # brute-force inf ||f(p)-f(q)|| / ||p-q|| over grid points of the unit disc
    g = np.linspace(-1, 1, n)
    P = np.array([(a, b) for a in g for b in g if a * a + b * b <= 1.0])
    dp = pdist(P)
    dv = pdist(evaluate(model, P))
    return float(np.min(dv / dp))


def fd_jacobian(model, x, h=1e-5):
    cols = []
    for j in range(model.input_dim):
        e = np.zeros(model.input_dim)
        e[j] = h
        cols.append((evaluate(model, x + e) - evaluate(model, x - e)) / (2 * h))
    return np.stack(cols, axis=1)


class TestEvaluate:
    def test_example_at_origin(self):
        np.testing.assert_array_equal(evaluate(EX1, [0, 0, 0]), [0.0, 0.0])

    def test_base_map(self):
        np.testing.assert_array_equal(evaluate(F0, [1, -1]), [3.0, -1.0])

    def test_batch(self):
        pts = np.array([[1.0, -1.0], [0.0, 2.0]])
        np.testing.assert_array_equal(evaluate(F0, pts), [[3.0, -1.0], [0.0, 6.0]])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            evaluate(F0, [1.0, 2.0, 3.0])


class TestKinks:
    def test_signature(self):
        sig = kink_signature(F0, [0.0, -0.3])
        assert sig.active == (0,) and sig.signs == (0, -1)

    def test_float_noise_is_active(self):
        assert kink_signature(F0, [1e-14, 0.5]).active == (0,)


class TestClarke:
    def test_base_map_at_origin(self):
        hull = clarke_generators(F0, [0, 0])
        expected = sorted(tuple(np.diag([s + 2.0, t + 2.0]).ravel())
                          for s in (-1, 1) for t in (-1, 1))
        assert as_set(hull) == expected
        assert hull.exactness == EXACT

    def test_differentiable_point(self):
        hull = clarke_generators(F0, [0.5, -0.5])
        assert hull.size == 1
        np.testing.assert_array_equal(hull.generators[0], np.diag([3.0, 1.0]))

    def test_partial_block(self):
        hull = clarke_generators(EX1, [0, 0, 0]).columns(1)
        expected = sorted(tuple(np.diag([s + 3.0, t + 3.0]).ravel())
                          for s in (-1, 1) for t in (-1, 1))
        assert as_set(hull) == expected

    def test_products_are_heuristic(self):
        f = parse_function("f(x, y) = (x*y + abs(x), y)")
        assert clarke_generators(f, [0, 1]).exactness == HEURISTIC

    def test_overflow(self):
        names = [f"x{i}" for i in range(MAX_ACTIVE_KINKS + 1)]
        body = ", ".join(f"abs({n})" for n in names)
        f = parse_function(f"f({', '.join(names)}) = ({body})")
        with pytest.raises(GeneratorOverflowError):
            clarke_generators(f, np.zeros(len(names)))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
    def test_branch_jacobian_is_a_generator(self, pt):
        x = np.array(pt)
        J = branch_jacobian(EX1, x)
        assert dist_to_hull(J, clarke_generators(EX1, x)) <= 1e-9


MODELS = [
    F0,
    EX1,
    parse_function("f(x, y) = (x*y - abs(x - 2*y), abs(abs(x) - y) * 0.3 + x*x)"),
    parse_function("f(x, y, z) = (z*abs(x + y) - 1.5, -(x - y*z))"),
]


@pytest.mark.parametrize("model", MODELS, ids=lambda m: str(m)[:30])
def test_jacobian_matches_finite_differences(model):
    rng = np.random.default_rng(17)
    checked = 0
    for x in rng.uniform(-1, 1, size=(200, model.input_dim)):
        # skip points too close to a kink for the central difference to be clean
        from lipcert.funcspec import abs_arguments
        if np.min(np.abs(abs_arguments(model, x))) < 1e-3:
            continue
        np.testing.assert_allclose(branch_jacobian(model, x), fd_jacobian(model, x),
                                   atol=1e-6, rtol=0)
        checked += 1
    assert checked > 100


class TestLipschitz:
    def test_example_sharp_is_root24(self):
        est = lipschitz_upper(EX1, Ball(np.zeros(3), 1.0))
        assert est.sharp == pytest.approx(math.sqrt(24), abs=1e-12)
        assert est.frobenius == pytest.approx(math.sqrt(40), abs=1e-12)
        assert est.exact

    def test_scalar(self):
        f = parse_function("f(x) = (3*x)")
        assert lipschitz_upper(f, Ball([5.0], 2.0)).sharp == pytest.approx(3.0)

    def test_base_map(self):
        assert lipschitz_upper(F0, UNIT2).sharp == pytest.approx(3.0)

    def test_products_use_enclosures(self):
        f = parse_function("f(x, y) = (x*y, y)")
        est = lipschitz_upper(f, UNIT2)
        assert not est.exact
        rng = np.random.default_rng(0)
        for x in rng.uniform(-0.7, 0.7, size=(50, 2)):
            assert np.linalg.norm(branch_jacobian(f, x), 2) <= est.sharp + 1e-12

    def test_region_status_far_from_kinks(self):
        assert region_sign_status(F0, Ball([2.0, -2.0], 0.5)) == (1, -1)
        assert len(region_jacobians(F0, Ball([2.0, -2.0], 0.5))) == 1


class TestBilipschitz:
    def test_base_map(self):
        val = bilipschitz_lower(F0, UNIT2)
        assert val == pytest.approx(1.0, abs=1e-12)
        assert val <= grid_min_ratio(F0) + 1e-12

    def test_identity(self):
        assert bilipschitz_lower(IDENT, UNIT2) == pytest.approx(1.0)

    def test_folding_map_is_zero(self):
        # every piece is invertible but the map folds, so no positive bound exists
        assert grid_min_ratio(CASE2) < 1e-9
        assert bilipschitz_lower(CASE2, UNIT2) == 0.0


class TestSampling:
    def test_base_map_values(self):
        for J in sample_jacobians(F0, UNIT2, 10, seed=1):
            assert J[0, 1] == 0 and J[1, 0] == 0
            assert J[0, 0] in (1.0, 3.0) and J[1, 1] in (1.0, 3.0)

    def test_affine(self):
        f = parse_function("f(x, y) = (2*x, 3*y)")
        mats = sample_jacobians(f, UNIT2, 5, seed=0)
        assert len(mats) == 5
        for J in mats:
            np.testing.assert_array_equal(J, np.diag([2.0, 3.0]))

    def test_example_inside_center_hull(self):
        hull = clarke_generators(EX1, np.zeros(3))
        for J in sample_jacobians(EX1, Ball(np.zeros(3), 1.0), 100, seed=7):
            assert dist_to_hull(J, hull) <= 1e-9

    def test_deterministic(self):
        a = sample_jacobians(EX1, Ball(np.zeros(3), 1.0), 20, seed=3)
        b = sample_jacobians(EX1, Ball(np.zeros(3), 1.0), 20, seed=3)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_rejection_budget(self):
        # abs(x - x) is a kink everywhere
        f = parse_function("f(x) = (abs(x - x) + x)")
        with pytest.raises(SamplingError):
            sample_jacobians(f, Ball([0.0], 1.0), 3, seed=0)


def test_ball_validation():
    with pytest.raises(ValueError):
        Ball([0.0], 0.0)
    with pytest.raises(ValueError):
        Ball([np.inf], 1.0)
