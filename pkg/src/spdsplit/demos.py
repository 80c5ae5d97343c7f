"""Seeded generators for the four benchmark scenarios.

Each generator returns (A, basis, info) where info carries the recommended
solver configuration and any scenario-specific structure (group action,
active block pairs).  All randomness flows through a single seeded
generator, so reports are reproducible at any size.

Scenarios:
  example1  dense A, small random zero-diagonal span (exact Newton baseline)
  example2  dense A, span of all pairs beyond the first off-diagonal, so the
            complement is tridiagonal and the dual solver does the work
  example3  block structure: within-block cyclic symmetry, zero-diagonal
            span supported on a chosen set of active block pairs, reduced to
            the group-fixed subspace
  example4  banded A and banded zero-diagonal span (banded Newton-CG)
"""

from __future__ import annotations

import itertools

import numpy as np

from .linalg import SparseSymMatrix, StructuredSpdMatrix
from .subspace import GroupAction, SubspaceBasis

__all__ = ["generate_example", "EXAMPLES"]


def _random_spd(rng, n, spread=1.0):
    g = rng.standard_normal((n, n))
    a = g @ g.T / n + (1.0 + spread) * np.eye(n)
    return 0.5 * (a + a.T)


def _random_zero_diagonal(rng, n):
    d = rng.standard_normal((n, n))
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


def example1(n=200, m=5, seed=0):
    """Dense SPD A with a small dense zero-diagonal span."""
    rng = np.random.default_rng(seed)
    a = _random_spd(rng, n)
    basis = SubspaceBasis(n, [_random_zero_diagonal(rng, n) for _ in range(m)])
    return StructuredSpdMatrix.dense(a), basis, {
        "method": "exact-newton", "structure": "dense"}


def example2(n=200, seed=0):
    """Span of every symmetric pair at distance >= 2; its trace complement
    is the tridiagonal matrices (dimension 2n - 1), handled by the dual."""
    rng = np.random.default_rng(seed)
    a = _random_spd(rng, n)
    mats = []
    for j in range(n):
        for i in range(j - 1):
            mats.append(SparseSymMatrix(n, [i], [j], [1.0]))
    basis = SubspaceBasis(n, mats)
    return StructuredSpdMatrix.dense(a), basis, {
        "method": "dual", "structure": "dense"}


# active block pairs for the 5-block symmetry scenario: all off-diagonal
# pairs except (3,4), plus the first two diagonal blocks; the fixed space
# then has dimension 9 * 1 + 2 * 2 = 13 under within-block rotations
_ACTIVE_OFF = [(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4), (2, 3), (2, 4)]
_ACTIVE_DIAG = [0, 1]


def example3(n=25, n_blocks=5, seed=0):
    """Within-block cyclic symmetry on equal blocks.

    A is block-constant with circulant diagonal blocks, hence fixed by the
    product of per-block cyclic rotations.  The span holds every
    zero-diagonal entry on the active block pairs, so the B component must
    vanish entrywise there; the group-fixed reduction shrinks the span to 13
    coordinates.
    """
    if n % n_blocks:
        raise ValueError("n must be a multiple of n_blocks")
    size = n // n_blocks
    rng = np.random.default_rng(seed)
    blocks = [np.arange(b * size, (b + 1) * size) for b in range(n_blocks)]

    a = np.zeros((n, n))
    for b, idx in enumerate(blocks):
        # SPD circulant block: dominant diagonal plus small symmetric
        # circulant terms at distances 1..size//2
        base = 3.0 + rng.uniform(0.0, 1.0)
        block = base * np.eye(size)
        for dist in range(1, size // 2 + 1):
            w = rng.uniform(-0.2, 0.2)
            for t in range(size):
                block[t, (t + dist) % size] += w
                block[(t + dist) % size, t] += w
        a[np.ix_(idx, idx)] = 0.5 * (block + block.T)
    for bi, bj in itertools.combinations(range(n_blocks), 2):
        w = rng.uniform(-0.15, 0.15)
        a[np.ix_(blocks[bi], blocks[bj])] = w
        a[np.ix_(blocks[bj], blocks[bi])] = w

    mats = []
    for bi, bj in _ACTIVE_OFF:
        for i in blocks[bi]:
            for j in blocks[bj]:
                mats.append(SparseSymMatrix(n, [i], [j], [1.0]))
    for b in _ACTIVE_DIAG:
        idx = blocks[b]
        for p in range(size):
            for q in range(p + 1, size):
                mats.append(SparseSymMatrix(n, [idx[p]], [idx[q]], [1.0]))
    basis = SubspaceBasis(n, mats)

    rotations = []
    for shifts in itertools.product(range(size), repeat=n_blocks):
        perm = np.arange(n)
        for b, s in enumerate(shifts):
            perm[blocks[b]] = np.roll(blocks[b], s)
        rotations.append(perm)
    group = GroupAction(rotations, n=n)

    active_pairs = [(bi, bj) for bi, bj in _ACTIVE_OFF] + [(b, b) for b in _ACTIVE_DIAG]
    return StructuredSpdMatrix.dense(a), basis, {
        "method": "exact-newton", "structure": "dense", "group": group,
        "blocks": blocks, "active_pairs": active_pairs,
        "expected_fixed_dim": 13 if (size == 5 and n_blocks == 5) else None}


def example4(n=500, bandwidth=2, seed=0):
    """Banded SPD A and the zero-diagonal pairs inside the band
    (m = 2n - 3 for bandwidth 2)."""
    rng = np.random.default_rng(seed)
    a = np.zeros((n, n))
    diag = 2.0 + rng.uniform(0.0, 1.0, size=n)
    a[np.arange(n), np.arange(n)] = diag
    for d in range(1, bandwidth + 1):
        w = rng.uniform(-0.3, 0.3, size=n - d)
        idx = np.arange(n - d)
        a[idx, idx + d] = w
        a[idx + d, idx] = w
    mats = []
    for d in range(1, bandwidth + 1):
        for i in range(n - d):
            mats.append(SparseSymMatrix(n, [i], [i + d], [1.0]))
    basis = SubspaceBasis(n, mats)
    return StructuredSpdMatrix.banded(a, bandwidth), basis, {
        "method": "newton-cg", "structure": "banded", "bandwidth": bandwidth}


EXAMPLES = {
    "example1": example1,
    "example2": example2,
    "example3": example3,
    "example4": example4,
}


def generate_example(name, n=None, seed=0):
    if name not in EXAMPLES:
        raise ValueError(f"unknown demo {name!r}; choose from {sorted(EXAMPLES)}")
    gen = EXAMPLES[name]
    if n is None:
        return gen(seed=seed)
    return gen(n=n, seed=seed)
