"""Shared instance generators for the test suite.

Random instances use zero-diagonal spans, which are feasible by construction
(a PSD matrix with zero diagonal is zero), so every generated problem has a
unique decomposition.
"""

import numpy as np
import pytest

from spdsplit import SparseSymMatrix, StructuredSpdMatrix, SubspaceBasis


def random_spd(rng, n, shift=1.0):
    g = rng.standard_normal((n, n))
    a = g @ g.T / n + shift * np.eye(n)
    return 0.5 * (a + a.T)


def random_zero_diag(rng, n):
    d = rng.standard_normal((n, n))
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


def random_instance(seed, n, m, shift=1.0):
    rng = np.random.default_rng(seed)
    a = random_spd(rng, n, shift)
    basis = SubspaceBasis(n, [random_zero_diag(rng, n) for _ in range(m)])
    return a, basis


def random_banded_spd(rng, n, b):
    a = np.zeros((n, n))
    a[np.arange(n), np.arange(n)] = 2.0 + rng.uniform(0, 1, n)
    for d in range(1, b + 1):
        w = rng.uniform(-0.4, 0.4, n - d)
        idx = np.arange(n - d)
        a[idx, idx + d] = w
        a[idx + d, idx] = w
    return a


def random_spd_toeplitz_column(rng, n):
    # diagonally dominant first column keeps the matrix safely SPD
    col = np.zeros(n)
    col[0] = 2.0 + rng.uniform(0, 1)
    decay = rng.uniform(0.2, 0.45)
    for d in range(1, min(n, 6)):
        col[d] = rng.uniform(-0.5, 0.5) * decay ** d
    return col


@pytest.fixture
def canonical_2x2():
    a = np.array([[2.0, 1.0], [1.0, 2.0]])
    basis = SubspaceBasis(2, [np.array([[0.0, 1.0], [1.0, 0.0]])])
    return a, basis


def pair_basis(n, pairs):
    return SubspaceBasis(
        n, [SparseSymMatrix(n, [i], [j], [1.0]) for i, j in pairs])


def as_dense_struct(a):
    return StructuredSpdMatrix.dense(a)
