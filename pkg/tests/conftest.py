"""Shared fixtures and independent oracle implementations.

The oracles here (permutation enumeration, elimination determinant) are
deliberately separate from the package code so the two sides of every
exactness check stay independent.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("suite", deadline=None, max_examples=25)
settings.load_profile("suite")


def perm_oracle(A, alpha: float) -> float:
    """Sum over permutations of alpha^cycles * product, by enumeration."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n == 0:
        return 1.0
    total = []
    for sigma in itertools.permutations(range(n)):
        prod = 1.0
        for i in range(n):
            prod *= A[i, sigma[i]]
        seen = [False] * n
        cycles = 0
        for i in range(n):
            if not seen[i]:
                cycles += 1
                j = i
                while not seen[j]:
                    seen[j] = True
                    j = sigma[j]
        total.append(alpha**cycles * prod)
    return math.fsum(total)


def cyp_oracle(A) -> float:
    """Sum over single-cycle permutations only, by enumeration."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    total = []
    for sigma in itertools.permutations(range(n)):
        seen = [False] * n
        cycles = 0
        for i in range(n):
            if not seen[i]:
                cycles += 1
                j = i
                while not seen[j]:
                    seen[j] = True
                    j = sigma[j]
        if cycles != 1:
            continue
        prod = 1.0
        for i in range(n):
            prod *= A[i, sigma[i]]
        total.append(prod)
    return math.fsum(total)


def elimination_det(A) -> float:
    """Determinant by Gaussian elimination with partial pivoting."""
    m = [row[:] for row in np.asarray(A, dtype=float).tolist()]
    n = len(m)
    det = 1.0
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(m[r][col]))
        if m[pivot][col] == 0.0:
            return 0.0
        if pivot != col:
            m[col], m[pivot] = m[pivot], m[col]
            det = -det
        det *= m[col][col]
        for r in range(col + 1, n):
            f = m[r][col] / m[col][col]
            for c in range(col, n):
                m[r][c] -= f * m[col][c]
    return det


def sym_nonneg(rng, n, diag_lo=0.5, diag_hi=1.5):
    """Random symmetric elementwise nonnegative matrix with a safe diagonal."""
    B = rng.random((n, n))
    M = (B + B.T) / 2.0
    np.fill_diagonal(M, rng.uniform(diag_lo, diag_hi, size=n))
    return M


def augment(G, kt, ktt):
    """Stack the query as the last row/column."""
    n = G.shape[0]
    out = np.empty((n + 1, n + 1))
    out[:n, :n] = G
    out[n, :n] = kt
    out[:n, n] = kt
    out[n, n] = ktt
    return out


def banded_gram(rng, n):
    """Bandwidth-2 Gram of 1-D points spaced >= 1 under a gaussian kernel;
    entries beyond the band are below 1e-4 of the diagonal, so the
    truncation is faithful."""
    gaps = 1.0 + rng.random(n - 1)
    pos = np.concatenate([[0.0], np.cumsum(gaps)])
    A = np.zeros((n, n))
    for i in range(n):
        A[i, i] = 1.0
        for off in (1, 2):
            if i + off < n:
                v = math.exp(-((pos[i + off] - pos[i]) ** 2))
                A[i, i + off] = A[i + off, i] = v
    return A


def block_constant_matrix(sizes, levels):
    n = sum(sizes)
    G = np.zeros((n, n))
    i0 = 0
    for s, c in zip(sizes, levels):
        G[i0:i0 + s, i0:i0 + s] = c
        i0 += s
    return G


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
