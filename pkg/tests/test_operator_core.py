"""Tests for dense operator algebra."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from imbed_toolkit.operator_core import (
    as_operator,
    d_operator_series,
    determinant_and_adjugate,
    exterior_power_trace,
    exterior_power_traces,
    fredholm_det_series,
    operator_from_json,
    operator_to_json,
    partial_trace,
    plemelj_smithies_beta,
    trace,
    trace_norm,
)


def _make_operator(dim: int, seed: int = 0, radius: float = 0.5) -> np.ndarray:
    """Random complex matrix with entries uniform in a disc."""
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.random((dim, dim)))
    return r * np.exp(2j * np.pi * rng.random((dim, dim)))


def _principal_minor_sum(A: np.ndarray, k: int) -> complex:
    """e_k as the sum of all k x k principal minors."""
    if k == 0:
        return 1.0
    idx = range(A.shape[0])
    return sum(np.linalg.det(A[np.ix_(rows, rows)]) for rows in itertools.combinations(idx, k))


class TestAsOperator:
    def test_rejects_non_square(self):
        with pytest.raises(ValueError, match="square"):
            as_operator(np.zeros((2, 3)))

    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="at least 1"):
            as_operator(np.zeros((0, 0)))

    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="finite"):
            as_operator([[1.0, np.nan], [0.0, 1.0]])


class TestTrace:
    def test_identity(self):
        assert trace(np.eye(3)) == 3

    def test_zero(self):
        assert trace(np.zeros((4, 4))) == 0

    def test_diagonal(self):
        assert trace(np.diag([1.0, 2.0, 3.0])) == 6


class TestTraceNorm:
    def test_identity(self):
        assert trace_norm(np.eye(5)) == pytest.approx(5.0)

    def test_normal_matrix(self):
        assert trace_norm(np.diag([-2.0, 3.0])) == pytest.approx(5.0)

    def test_bounds_trace(self):
        for seed in range(10):
            A = _make_operator(6, seed=seed)
            assert trace_norm(A) >= abs(trace(A)) - 1e-12


class TestExteriorPowerTrace:
    def test_elementary_symmetric(self):
        assert exterior_power_trace(np.diag([1.0, 2.0, 3.0]), 2) == pytest.approx(11.0)

    def test_k_zero_is_one(self):
        assert exterior_power_trace(_make_operator(3), 0) == 1

    def test_above_dimension_is_zero(self):
        assert exterior_power_trace(np.diag([1.0, 2.0, 3.0]), 4) == 0

    def test_matches_principal_minors(self):
        for seed in range(5):
            A = _make_operator(5, seed=seed)
            e = exterior_power_traces(A, 5)
            for k in range(6):
                assert e[k] == pytest.approx(_principal_minor_sum(A, k), abs=1e-12)

    @pytest.mark.parametrize("dim, radius", [(4, 0.5), (7, 1.0), (10, 2.0)])
    def test_bounded_by_trace_norm_powers(self, dim, radius):
        for seed in range(5):
            A = _make_operator(dim, seed=seed, radius=radius)
            norm1 = trace_norm(A)
            e = exterior_power_traces(A, dim + 2)
            for k, value in enumerate(e):
                bound = norm1**k / math.factorial(k)
                assert abs(value) <= bound * (1 + 1e-12) + 1e-12

    def test_negative_k_raises(self):
        with pytest.raises(ValueError, match="non-negative"):
            exterior_power_trace(np.eye(2), -1)


class TestPartialTrace:
    def test_k_one_is_identity(self):
        A = _make_operator(4, seed=3)
        np.testing.assert_allclose(partial_trace(A, 1), np.eye(4), atol=0)

    def test_one_dimensional(self):
        np.testing.assert_allclose(partial_trace([[7.0]], 1), [[1.0]])

    def test_recursion_identity(self):
        # k Tr_{k-1} + (k-1) A Tr_{k-2} = Tr[Λ^{k-1}] I
        A = np.diag([1.0, 2.0])
        e = exterior_power_traces(A, 2)
        lhs = 2 * partial_trace(A, 2) + A @ partial_trace(A, 1)
        np.testing.assert_allclose(lhs, e[1] * np.eye(2), atol=1e-14)

    def test_recursion_identity_random(self):
        for seed in range(8):
            A = _make_operator(6, seed=seed)
            e = exterior_power_traces(A, 6)
            for k in range(2, 8):
                lhs = k * partial_trace(A, k) + (k - 1) * A @ partial_trace(A, k - 1)
                np.testing.assert_allclose(lhs, e[k - 1] * np.eye(6), atol=1e-12)

    def test_brute_force_permutation_sum(self):
        # Tr_{k-1}[Λ^k(A)] · C traced equals (1/k!) Σ over ordered distinct index tuples
        # of the antisymmetrized product with C in the first slot.
        A = _make_operator(3, seed=11)
        C = _make_operator(3, seed=12)
        k = 2
        dim = 3
        total = 0j
        for idx in itertools.permutations(range(dim), k):
            for perm in itertools.permutations(range(k)):
                sign = np.linalg.det(np.eye(k)[list(perm)])
                factor = C[idx[0], idx[perm[0]]]
                for slot in range(1, k):
                    factor *= A[idx[slot], idx[perm[slot]]]
                total += sign * factor
        expected = total / math.factorial(k)
        assert np.trace(C @ partial_trace(A, k)) == pytest.approx(expected, abs=1e-12)

    def test_invalid_k(self):
        with pytest.raises(ValueError, match="at least 1"):
            partial_trace(np.eye(2), 0)


class TestFredholmDetSeries:
    def test_zero_operator(self):
        report = fredholm_det_series(np.zeros((3, 3)), tol=1e-12)
        assert report.value == 1
        assert report.terms_used == 1
        assert report.truncation_bound == 0.0

    def test_diagonal(self):
        report = fredholm_det_series(np.diag([1.0, 2.0, 3.0]), tol=1e-12)
        assert report.value == pytest.approx(24.0)
        assert report.terms_used == 4

    def test_identity(self):
        assert fredholm_det_series(np.eye(2), tol=1e-12).value == pytest.approx(4.0)

    def test_matches_lu_on_random_operators(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            dim = int(rng.integers(1, 9))
            A = _make_operator(dim, seed=int(rng.integers(1 << 31)))
            det, _ = determinant_and_adjugate(A)
            report = fredholm_det_series(A, tol=1e-14)
            assert abs(report.value - det) <= 1e-9 * abs(det)
            assert report.truncation_bound >= 0
            assert report.terms_used >= 1

    def test_small_operator_stops_early(self):
        A = 1e-6 * np.eye(4)
        report = fredholm_det_series(A, tol=1e-3)
        assert report.terms_used < 5
        assert report.value == pytest.approx((1 + 1e-6) ** 4, abs=1e-3)

    def test_invalid_tol(self):
        with pytest.raises(ValueError, match="positive"):
            fredholm_det_series(np.eye(2), tol=0.0)


class TestDOperatorSeries:
    def test_zero_gives_identity(self):
        np.testing.assert_allclose(d_operator_series(np.zeros((3, 3))), np.eye(3))

    def test_identity(self):
        np.testing.assert_allclose(d_operator_series(np.eye(2)), 2 * np.eye(2), atol=1e-14)

    def test_diagonal(self):
        np.testing.assert_allclose(
            d_operator_series(np.diag([1.0, 2.0])), np.diag([3.0, 2.0]), atol=1e-14
        )

    def test_left_right_identities_and_commutation(self):
        for seed in range(20):
            A = _make_operator(int(seed % 8) + 1, seed=seed)
            dim = A.shape[0]
            det, adj = determinant_and_adjugate(A)
            D = d_operator_series(A)
            scale = 1 + abs(det)
            assert np.max(np.abs(D + A @ D - det * np.eye(dim))) < 1e-9 * scale
            assert np.max(np.abs(D + D @ A - det * np.eye(dim))) < 1e-9 * scale
            AD = A @ D
            assert np.max(np.abs(AD - D @ A)) < 1e-10 * (1 + np.max(np.abs(AD)))
            np.testing.assert_allclose(D, adj, atol=1e-9 * scale)

    def test_sum_of_partial_traces(self):
        A = _make_operator(4, seed=5)
        direct = sum(k * partial_trace(A, k) for k in range(1, 6))
        np.testing.assert_allclose(d_operator_series(A), direct, atol=1e-12)


class TestPlemeljSmithiesBeta:
    def test_k_one_is_operator(self):
        A = _make_operator(3, seed=7)
        np.testing.assert_allclose(plemelj_smithies_beta(A, 1), A, atol=1e-15)

    def test_zero_operator(self):
        for k in range(1, 4):
            np.testing.assert_allclose(plemelj_smithies_beta(np.zeros((3, 3)), k), 0.0)

    def test_matches_partial_trace(self):
        for seed in range(10):
            A = _make_operator(5, seed=seed)
            for k in range(1, 6):
                expected = math.factorial(k) * A @ partial_trace(A, k)
                np.testing.assert_allclose(
                    plemelj_smithies_beta(A, k), expected,
                    atol=1e-9 * (1 + np.max(np.abs(expected))),
                )


class TestDeterminantAndAdjugate:
    def test_matches_numpy(self):
        A = _make_operator(6, seed=9)
        det, adj = determinant_and_adjugate(A)
        M = np.eye(6) + A
        assert det == pytest.approx(np.linalg.det(M), rel=1e-12)
        np.testing.assert_allclose(adj @ M, det * np.eye(6), atol=1e-12)


class TestOperatorJson:
    def test_dump_format(self):
        dump = operator_to_json([[1.0, 2j], [0.0, -1.0]])
        assert dump["dim"] == 2
        assert dump["entries"][1] == [0.0, 2.0]

    def test_load_dump(self):
        A = _make_operator(3, seed=1)
        np.testing.assert_array_equal(operator_from_json(operator_to_json(A)), A)

    def test_load_rejects_wrong_count(self):
        with pytest.raises(ValueError, match="entries"):
            operator_from_json({"dim": 2, "entries": [[1.0, 0.0]]})
