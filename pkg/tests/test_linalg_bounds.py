import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lipcert.errors import DimensionError, PreconditionError
from lipcert.linalg_bounds import (
    frobenius_norm,
    matrix_from_json,
    matrix_to_json,
    neumann_inverse,
    op_norm,
    perturbed_inverse_check,
    sigma_min,
)


def sphere_grid_max(A, n_theta=400, n_phi=800):
    # brute force max ||Ax|| over a lat/long grid on the unit sphere in R^3
    th = np.linspace(0, np.pi, n_theta)
    ph = np.linspace(0, 2 * np.pi, n_phi)
    T, P = np.meshgrid(th, ph, indexing="ij")
    X = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1)
    return float(np.max(np.linalg.norm(X.reshape(-1, 3) @ A.T, axis=1)))


def series_inverse(F, terms=200):
    out = np.eye(F.shape[0])
    P = np.eye(F.shape[0])
    for _ in range(terms):
        P = P @ F
        out = out + P
    return out


class TestNorms:
    def test_op_norm_diag(self):
        assert op_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0)

    def test_op_norm_zero(self):
        assert op_norm(np.zeros((2, 2))) == 0.0

    def test_op_norm_against_sphere_grid(self):
        A = np.random.default_rng(11).normal(size=(3, 3))
        assert abs(op_norm(A) - sphere_grid_max(A)) < 1e-4

    @pytest.mark.parametrize("A,expected", [
        (np.eye(2), math.sqrt(2)),
        (np.diag([3.0, 4.0]), 5.0),
        (np.ones((2, 3)), math.sqrt(6)),
    ])
    def test_frobenius(self, A, expected):
        assert frobenius_norm(A) == pytest.approx(expected)

    @pytest.mark.parametrize("A,expected", [
        (np.eye(4), 1.0),
        (np.diag([2.0, 4.0]), 2.0),
        (np.array([[0.0, 1.0], [1.0, 0.0]]), 1.0),
    ])
    def test_sigma_min(self, A, expected):
        assert sigma_min(A) == pytest.approx(expected)

    def test_sigma_min_non_square(self):
        with pytest.raises(DimensionError):
            sigma_min(np.ones((2, 3)))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            op_norm(np.array([[np.nan, 0.0], [0.0, 1.0]]))

    @settings(max_examples=60, deadline=None)
    @given(arrays(float, (3, 3), elements=st.floats(-5, 5)))
    def test_sigma_min_below_op_norm(self, A):
        assert sigma_min(A) <= op_norm(A) + 1e-12
        assert op_norm(A) <= frobenius_norm(A) + 1e-12


class TestNeumann:
    def test_zero(self):
        inv, bound = neumann_inverse(np.zeros((2, 2)))
        np.testing.assert_allclose(inv, np.eye(2))
        assert bound == 1.0

    def test_diagonal_tight(self):
        inv, bound = neumann_inverse(np.diag([0.5, -0.5]))
        np.testing.assert_allclose(inv, np.diag([2.0, 2.0 / 3.0]))
        assert bound == pytest.approx(2.0)
        assert op_norm(inv) == pytest.approx(bound)

    def test_random_against_solve_and_series(self):
        F = np.random.default_rng(3).normal(size=(3, 3))
        F *= 0.9 / op_norm(F)
        inv, bound = neumann_inverse(F)
        np.testing.assert_allclose(inv, np.linalg.solve(np.eye(3) - F, np.eye(3)), atol=1e-8)
        assert bound == pytest.approx(10.0)
        assert op_norm(inv) <= 10.0 + 1e-8

    def test_series_oracle(self):
        F = np.random.default_rng(4).normal(size=(2, 2))
        F *= 0.6 / op_norm(F)
        inv, _ = neumann_inverse(F)
        np.testing.assert_allclose(inv, series_inverse(F), atol=1e-12)

    def test_norm_one_rejected(self):
        with pytest.raises(PreconditionError):
            neumann_inverse(np.eye(2))


class TestPerturbedInverse:
    def test_diagonal(self):
        chk = perturbed_inverse_check(np.diag([1.0, 2.0]), np.diag([0.5, 0.0]))
        assert chk.r == pytest.approx(0.5)
        assert chk.deviation == pytest.approx(1.0 / 3.0)
        assert chk.bound == pytest.approx(1.0)
        assert chk.nonsingular

    def test_identity_zero(self):
        chk = perturbed_inverse_check(np.eye(2), np.zeros((2, 2)))
        assert (chk.r, chk.deviation, chk.bound) == (0.0, 0.0, 0.0)

    def test_random_well_conditioned(self):
        rng = np.random.default_rng(5)
        Q1, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        Q2, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        A = Q1 @ np.diag([1.0, 3.0, 10.0]) @ Q2
        E0 = rng.normal(size=(3, 3))
        E = E0 * 0.5 / op_norm(np.linalg.inv(A) @ E0)
        chk = perturbed_inverse_check(A, E)
        assert chk.r == pytest.approx(0.5)
        direct = op_norm(np.linalg.inv(A + E) - np.linalg.inv(A))
        assert chk.deviation == pytest.approx(direct)
        assert chk.deviation <= chk.bound

    def test_too_large(self):
        chk = perturbed_inverse_check(np.eye(2), -np.eye(2))
        assert not chk.nonsingular

    def test_singular_base(self):
        with pytest.raises(PreconditionError):
            perturbed_inverse_check(np.zeros((2, 2)), np.eye(2))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            perturbed_inverse_check(np.eye(2), np.eye(3))


def test_matrix_json_roundtrip():
    A = np.array([[1.0, -2.5, 0.1], [3.0, 4.0, 1e-300]])
    d = matrix_to_json(A)
    assert d["rows"] == 2 and d["cols"] == 3
    np.testing.assert_array_equal(matrix_from_json(d), A)


def test_matrix_json_bad_shape():
    with pytest.raises(ValueError):
        matrix_from_json({"rows": 2, "cols": 2, "entries": [1.0, 2.0, 3.0]})
