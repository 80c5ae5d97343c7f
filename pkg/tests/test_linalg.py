"""Structured factorization primitives against dense references."""

import numpy as np
import pytest

from spdsplit import (
    DimensionMismatch,
    NotPositiveDefinite,
    PatternOutsideBand,
    SparseSymMatrix,
    StructuredSpdMatrix,
    detect_structure,
    factorize,
    newton_cg,
    selected_inverse,
    solve,
    trace_inv_pair,
    trace_inv_times,
)
from spdsplit.linalg import ToeplitzFactorization

from conftest import random_banded_spd, random_spd, random_spd_toeplitz_column

A2 = np.array([[2.0, 1.0], [1.0, 2.0]])
OFFDIAG = SparseSymMatrix(2, [0], [1], [1.0])


def eig_logdet(a):
    return float(np.sum(np.log(np.linalg.eigvalsh(a))))


class TestFactorize:
    def test_identity_logdet_zero(self):
        f = factorize(StructuredSpdMatrix.dense(np.eye(3)))
        assert f.log_determinant == pytest.approx(0.0, abs=1e-15)

    def test_2x2_logdet(self):
        f = factorize(StructuredSpdMatrix.dense(A2))
        assert f.log_determinant == pytest.approx(np.log(3.0), abs=1e-14)

    def test_toeplitz_matches_dense(self):
        col = np.array([2.0, 1.0, 0.0, 0.0])
        ft = factorize(StructuredSpdMatrix.toeplitz(col))
        fd = factorize(StructuredSpdMatrix.dense(
            StructuredSpdMatrix.toeplitz(col).to_dense()))
        assert abs(ft.log_determinant - fd.log_determinant) <= 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_not_pd_matches_eigenvalue_sign(self, seed):
        # min eigenvalue pushed to either side of 0 by a margin of 1e-6
        rng = np.random.default_rng(seed)
        a = random_spd(rng, 8, shift=0.0)
        w, v = np.linalg.eigh(a)
        for target in (1e-6, -1e-6):
            shifted = a + (target - w[0]) * np.eye(8)
            struct = StructuredSpdMatrix.dense(shifted)
            if target > 0:
                factorize(struct)
            else:
                with pytest.raises(NotPositiveDefinite):
                    factorize(struct)

    def test_not_pd_banded_and_toeplitz(self):
        ab = np.array([[1.0, 1.0, -0.5], [0.4, 0.4, 0.0]])
        with pytest.raises(NotPositiveDefinite):
            factorize(StructuredSpdMatrix.from_band_array(ab))
        col = np.array([1.0, 1.1, 0.0])  # min eig of this Toeplitz is negative
        assert np.linalg.eigvalsh(StructuredSpdMatrix.toeplitz(col).to_dense())[0] < 0
        with pytest.raises(NotPositiveDefinite):
            factorize(StructuredSpdMatrix.toeplitz(col))


class TestSolve:
    def test_identity(self):
        f = factorize(StructuredSpdMatrix.dense(np.eye(3)))
        e1 = np.array([1.0, 0.0, 0.0])
        np.testing.assert_allclose(solve(f, e1), e1, atol=1e-15)

    def test_2x2(self):
        f = factorize(StructuredSpdMatrix.dense(A2))
        np.testing.assert_allclose(
            solve(f, np.array([1.0, 0.0])), [2.0 / 3.0, -1.0 / 3.0], atol=1e-14)

    def test_rhs_shape_mismatch(self):
        f = factorize(StructuredSpdMatrix.dense(A2))
        with pytest.raises(DimensionMismatch):
            solve(f, np.zeros(3))

    @pytest.mark.parametrize("seed", range(4))
    def test_banded_matches_dense(self, seed):
        rng = np.random.default_rng(seed)
        a = random_banded_spd(rng, 40, 2)
        rhs = rng.standard_normal((40, 3))
        xb = factorize(StructuredSpdMatrix.banded(a, 2)).solve(rhs)
        xd = factorize(StructuredSpdMatrix.dense(a)).solve(rhs)
        assert np.max(np.abs(xb - xd)) <= 1e-10

    @pytest.mark.parametrize("seed", range(4))
    def test_residual_bound(self, seed):
        rng = np.random.default_rng(seed + 100)
        a = random_spd(rng, 30)
        rhs = rng.standard_normal((30, 2))
        x = factorize(StructuredSpdMatrix.dense(a)).solve(rhs)
        assert np.linalg.norm(a @ x - rhs) <= 1e-10 * np.linalg.norm(rhs)


class TestSelectedInverse:
    def test_identity_off_entry(self):
        f = factorize(StructuredSpdMatrix.dense(np.eye(2)))
        assert selected_inverse(f, [(0, 1)]) == [0.0]

    def test_2x2_entries(self):
        f = factorize(StructuredSpdMatrix.dense(A2))
        vals = selected_inverse(f, [(0, 0), (0, 1)])
        np.testing.assert_allclose(vals, [2.0 / 3.0, -1.0 / 3.0], atol=1e-14)

    def test_banded_band_pattern_matches_dense(self):
        rng = np.random.default_rng(7)
        n, b = 50, 2
        a = random_banded_spd(rng, n, b)
        fb = factorize(StructuredSpdMatrix.banded(a, b))
        inv = np.linalg.inv(a)
        pattern = [(i, j) for i in range(n) for j in range(max(0, i - b), min(n, i + b + 1))]
        got = selected_inverse(fb, pattern)
        want = [inv[i, j] for i, j in pattern]
        assert np.max(np.abs(np.array(got) - np.array(want))) <= 1e-10

    def test_banded_outside_band_raises(self):
        rng = np.random.default_rng(3)
        a = random_banded_spd(rng, 10, 1)
        fb = factorize(StructuredSpdMatrix.banded(a, 1))
        with pytest.raises(PatternOutsideBand):
            selected_inverse(fb, [(0, 5)])

    def test_pattern_out_of_range(self):
        f = factorize(StructuredSpdMatrix.dense(A2))
        with pytest.raises(DimensionMismatch):
            selected_inverse(f, [(0, 7)])


class TestTraces:
    def test_zero_diagonal_identity(self):
        f = factorize(StructuredSpdMatrix.dense(np.eye(2)))
        assert trace_inv_times(f, OFFDIAG) == 0.0

    def test_2x2_trace(self):
        f = factorize(StructuredSpdMatrix.dense(A2))
        assert trace_inv_times(f, OFFDIAG) == pytest.approx(-2.0 / 3.0, abs=1e-14)

    def test_stationarity_at_solution(self, canonical_2x2):
        a, basis = canonical_2x2
        res = newton_cg(a, basis)
        f = factorize(StructuredSpdMatrix.dense(a - res.C))
        assert abs(trace_inv_times(f, OFFDIAG)) <= 1e-7

    def test_pair_identity_offdiag(self):
        f = factorize(StructuredSpdMatrix.dense(np.eye(2)))
        assert trace_inv_pair(f, OFFDIAG, OFFDIAG) == pytest.approx(2.0, abs=1e-14)

    def test_pair_2x2(self):
        f = factorize(StructuredSpdMatrix.dense(A2))
        assert trace_inv_pair(f, OFFDIAG, OFFDIAG) == pytest.approx(10.0 / 9.0, abs=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_pair_random_vs_bruteforce(self, seed):
        rng = np.random.default_rng(seed)
        a = random_spd(rng, 6)
        f = factorize(StructuredSpdMatrix.dense(a))
        d1 = SparseSymMatrix.from_dense(
            0.5 * (lambda m: m + m.T)(rng.standard_normal((6, 6))))
        d2 = SparseSymMatrix.from_dense(
            0.5 * (lambda m: m + m.T)(rng.standard_normal((6, 6))))
        inv = np.linalg.inv(a)
        brute = np.trace(inv @ d1.to_dense() @ inv @ d2.to_dense())
        assert abs(trace_inv_pair(f, d1, d2) - brute) <= 1e-10

    def test_dimension_mismatch(self):
        f = factorize(StructuredSpdMatrix.dense(A2))
        with pytest.raises(DimensionMismatch):
            trace_inv_times(f, SparseSymMatrix(3, [0], [1], [1.0]))


class TestBackendEquivalence:
    @pytest.mark.parametrize("seed", range(6))
    def test_banded_full_agreement(self, seed):
        rng = np.random.default_rng(seed)
        n, b = 60, 3
        a = random_banded_spd(rng, n, b)
        fb = factorize(StructuredSpdMatrix.banded(a, b))
        fd = factorize(StructuredSpdMatrix.dense(a))
        assert abs(fb.log_determinant - fd.log_determinant) <= 1e-9
        assert abs(fb.log_determinant - eig_logdet(a)) <= 1e-9
        rhs = rng.standard_normal(n)
        assert np.max(np.abs(fb.solve(rhs) - fd.solve(rhs))) <= 1e-9
        d = SparseSymMatrix(n, [0, 2, 5], [1, 3, 5], [1.0, -0.5, 2.0])
        assert abs(trace_inv_times(fb, d) - trace_inv_times(fd, d)) <= 1e-9
        assert abs(trace_inv_pair(fb, d, d) - trace_inv_pair(fd, d, d)) <= 1e-9

    @pytest.mark.parametrize("seed", range(6))
    def test_toeplitz_full_agreement(self, seed):
        rng = np.random.default_rng(seed + 50)
        n = 40
        col = random_spd_toeplitz_column(rng, n)
        t = StructuredSpdMatrix.toeplitz(col)
        ft = factorize(t)
        fd = factorize(StructuredSpdMatrix.dense(t.to_dense()))
        assert abs(ft.log_determinant - fd.log_determinant) <= 1e-9
        rhs = rng.standard_normal((n, 2))
        assert np.max(np.abs(ft.solve(rhs) - fd.solve(rhs))) <= 1e-9
        assert np.max(np.abs(ft.inverse_dense() - fd.inverse_dense())) <= 1e-9

    def test_gs_entries_match_trench(self):
        rng = np.random.default_rng(11)
        col = random_spd_toeplitz_column(rng, 25)
        ft = factorize(StructuredSpdMatrix.toeplitz(col))
        assert isinstance(ft, ToeplitzFactorization)
        inv = ft.inverse_dense()
        for i in range(0, 25, 3):
            for j in range(0, 25, 4):
                assert abs(ft.gs_entry(i, j) - inv[i, j]) <= 1e-12


class TestSparseSymMatrix:
    def test_duplicate_entries_rejected(self):
        with pytest.raises(ValueError):
            SparseSymMatrix(3, [0, 1], [1, 0], [1.0, 2.0])

    def test_metadata(self):
        d = SparseSymMatrix(5, [0, 1], [2, 1], [1.0, 3.0])
        assert d.half_bandwidth == 2
        assert not d.zero_diagonal
        assert d.support_size == 2
        assert SparseSymMatrix(5, [0], [3], [1.0]).zero_diagonal

    def test_frobenius_counts_both_triangles(self):
        d = SparseSymMatrix(2, [0], [1], [3.0])
        assert d.frobenius_norm() == pytest.approx(np.sqrt(18.0))

    def test_toeplitz_first_column_detection(self):
        d = SparseSymMatrix(3, [0, 1, 0], [1, 2, 2], [2.0, 2.0, 7.0])
        np.testing.assert_allclose(d.toeplitz_first_column(), [0.0, 2.0, 7.0])
        partial = SparseSymMatrix(3, [0], [1], [2.0])  # incomplete diagonal
        assert partial.toeplitz_first_column() is None


def test_factor_reconstructs_input():
    rng = np.random.default_rng(17)
    a = random_spd(rng, 20)
    f = factorize(StructuredSpdMatrix.dense(a))
    rebuilt = f._lower @ f._lower.T
    assert np.linalg.norm(rebuilt - a) <= 1e-12 * np.linalg.norm(a)
    ab = random_banded_spd(rng, 20, 2)
    fb = factorize(StructuredSpdMatrix.banded(ab, 2))
    dense_l = np.zeros((20, 20))
    for d in range(3):
        idx = np.arange(20 - d)
        dense_l[idx + d, idx] = fb._cb[d, :20 - d]
    assert np.linalg.norm(dense_l @ dense_l.T - ab) <= 1e-12 * np.linalg.norm(ab)


def test_detect_structure():
    assert detect_structure(np.eye(4)).structure == "banded"
    rng = np.random.default_rng(0)
    col = random_spd_toeplitz_column(rng, 12)
    dense_toe = StructuredSpdMatrix.toeplitz(col).to_dense()
    assert detect_structure(dense_toe).structure in ("toeplitz", "banded")
    full = random_spd(rng, 8)
    assert detect_structure(full).structure == "dense"
