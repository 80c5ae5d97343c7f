"""Dual solver: parameterization over the complement, recovery, identities."""

import numpy as np
import pytest

from spdsplit import (
    NoObviousDualStart,
    SolverOptions,
    SparseSymMatrix,
    SubspaceBasis,
    complement_basis,
    dual_newton_cg,
    evaluate_psi_grad,
    initial_dual_point,
    newton_cg,
)
from spdsplit.dual import dual_hv_product

from conftest import pair_basis, random_instance

A2 = np.array([[2.0, 1.0], [1.0, 2.0]])
OFF = np.array([[0.0, 1.0], [1.0, 0.0]])


def offdiag_basis():
    return SubspaceBasis(2, [OFF])


class TestInitialDualPoint:
    def test_zero_diagonal_span_gives_identity(self):
        basis = pair_basis(4, [(0, 1), (2, 3)])
        np.testing.assert_allclose(initial_dual_point(np.eye(4), basis),
                                   np.eye(4), atol=1e-12)

    def test_offdiag_span(self):
        np.testing.assert_allclose(initial_dual_point(A2, offdiag_basis()),
                                   np.eye(2), atol=1e-12)

    def test_indefinite_diagonal_span(self):
        basis = SubspaceBasis(2, [np.diag([1.0, -1.0])])
        np.testing.assert_allclose(initial_dual_point(np.eye(2), basis),
                                   np.eye(2), atol=1e-12)

    def test_no_obvious_start(self):
        # S-perp = span{diag(1,-1)} holds no SPD matrix at all
        basis = complement_basis(SubspaceBasis(2, [np.diag([1.0, -1.0])]))
        with pytest.raises(NoObviousDualStart):
            initial_dual_point(A2, basis)


class TestEvaluatePsi:
    def test_identity_instance(self):
        comp = complement_basis(offdiag_basis())
        st = evaluate_psi_grad(np.eye(2), comp, np.eye(2), np.zeros(2))
        assert st.psi == pytest.approx(-2.0, abs=1e-14)
        np.testing.assert_allclose(st.grad, np.zeros(2), atol=1e-14)

    def test_canonical_gradient_at_start(self):
        comp = complement_basis(offdiag_basis())
        st = evaluate_psi_grad(A2, comp, np.eye(2), np.zeros(2))
        np.testing.assert_allclose(st.grad, [-1.0, -1.0], atol=1e-14)

    def test_gradient_vanishes_at_solution(self):
        comp = complement_basis(offdiag_basis())
        # y placing B(y) = I/2 for diagonal-unit complement elements
        y = comp.to_original_coordinates(
            comp.project(0.5 * np.eye(2) - np.eye(2))[0])
        st = evaluate_psi_grad(A2, comp, np.eye(2), y)
        np.testing.assert_allclose(st.B, 0.5 * np.eye(2), atol=1e-12)
        np.testing.assert_allclose(st.grad, np.zeros(2), atol=1e-12)


class TestDualHv:
    def test_system_matrix_identity(self):
        comp = complement_basis(offdiag_basis())
        st = evaluate_psi_grad(np.eye(2), comp, np.eye(2), np.zeros(2))
        np.testing.assert_allclose(dual_hv_product(st, comp, [1.0, 0.0]),
                                   [1.0, 0.0], atol=1e-14)

    def test_system_matrix_scales_with_b(self):
        comp = complement_basis(offdiag_basis())
        y = comp.to_original_coordinates(
            comp.project(0.5 * np.eye(2) - np.eye(2))[0])
        st = evaluate_psi_grad(np.eye(2), comp, np.eye(2), y)
        np.testing.assert_allclose(dual_hv_product(st, comp, [1.0, 0.0]),
                                   [4.0, 0.0], atol=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_finite_differences(self, seed):
        a, basis = random_instance(seed + 60, 6, 2)
        comp = complement_basis(basis)
        b0 = initial_dual_point(a, basis)
        rng = np.random.default_rng(seed)
        y = 0.02 * rng.standard_normal(comp.m)
        st = evaluate_psi_grad(a, comp, b0, y)
        h = 1e-6
        for k in range(3):
            e = np.zeros(comp.m)
            e[k] = h
            gp = evaluate_psi_grad(a, comp, b0, y + e).grad
            gm = evaluate_psi_grad(a, comp, b0, y - e).grad
            fd_col = (gp - gm) / (2 * h)  # column of the psi Hessian
            hv = dual_hv_product(st, comp, np.eye(comp.m)[k])
            denom = max(1.0, np.linalg.norm(fd_col))
            assert np.linalg.norm(hv - (-fd_col)) / denom <= 1e-6


class TestDualSolver:
    def test_canonical(self, canonical_2x2):
        a, basis = canonical_2x2
        res = dual_newton_cg(a, basis)
        np.testing.assert_allclose(res.B, 0.5 * np.eye(2), atol=1e-8)
        np.testing.assert_allclose(res.C, OFF, atol=1e-8)
        assert res.projection_residual <= 1e-8

    def test_identity_zero_diag(self):
        basis = pair_basis(3, [(0, 1), (1, 2)])
        res = dual_newton_cg(np.eye(3), basis)
        np.testing.assert_allclose(res.B, np.eye(3), atol=1e-8)

    @pytest.mark.parametrize("seed", range(4))
    def test_agrees_with_primal(self, seed):
        a, basis = random_instance(seed + 80, 8, 3)
        rp = newton_cg(a, basis)
        rd = dual_newton_cg(a, basis)
        assert np.linalg.norm(rd.B - rp.B) <= 1e-6 * np.linalg.norm(rp.B)

    @pytest.mark.parametrize("seed", range(4))
    def test_value_and_trace_identities(self, seed):
        n = 7
        a, basis = random_instance(seed + 100, n, 3)
        rp = newton_cg(a, basis)
        rd = dual_newton_cg(a, basis)
        psi = np.linalg.slogdet(rd.B)[1] - float(np.sum(rd.B * a))
        # strong duality bookkeeping: psi* and phi* differ by exactly n
        assert abs(psi - (rp.phi - n)) <= 1e-8
        assert abs(float(np.sum(rd.B * a)) - n) <= 1e-8
        assert abs(float(np.sum(rp.B * a)) - n) <= 1e-8

    def test_affine_feasibility_of_iterates(self, canonical_2x2):
        a, basis = canonical_2x2
        comp = complement_basis(basis)
        b0 = initial_dual_point(a, basis)
        rng = np.random.default_rng(0)
        for _ in range(5):
            y = 0.1 * rng.standard_normal(comp.m)
            st = evaluate_psi_grad(a, comp, b0, y)
            worst = max(abs(np.trace(st.B @ e.to_dense())) for e in basis.elements)
            assert worst <= 1e-10

    def test_banded_complement_structure(self):
        # distance >= 2 pairs: complement is tridiagonal, B(y) stays banded
        rng = np.random.default_rng(5)
        n = 30
        g = rng.standard_normal((n, n))
        a = g @ g.T / n + 2.0 * np.eye(n)
        mats = [SparseSymMatrix(n, [i], [j], [1.0])
                for j in range(n) for i in range(j - 1)]
        basis = SubspaceBasis(n, mats)
        comp = complement_basis(basis)
        assert comp.m == 2 * n - 1
        assert comp.max_half_bandwidth == 1
        res = dual_newton_cg(a, basis, SolverOptions(grad_tolerance=1e-11))
        assert res.reconstruction_error <= 1e-10
        rp = newton_cg(a, basis)
        assert np.linalg.norm(res.B - rp.B) <= 1e-6 * np.linalg.norm(rp.B)

    def test_explicit_b0(self, canonical_2x2):
        a, basis = canonical_2x2
        res = dual_newton_cg(a, basis, b0=2.0 * np.eye(2))
        np.testing.assert_allclose(res.B, 0.5 * np.eye(2), atol=1e-8)
