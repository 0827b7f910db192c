"""Exact alpha-permanents, cyclic product sums, and exact ratios.

This is the oracle layer: everything here is exact up to floating point
and feasible only at desk scale.  The alpha-permanent

    per_a(A) = sum_sigma a^{#sigma} prod_i A[i, sigma(i)]

sums over all permutations weighted by alpha to the number of cycles;
alpha = 1 is the ordinary permanent and per_{-1}(A) = (-1)^n det(A).
The cyclic product sum cyp(A) restricts the sum to single-cycle
permutations and equals lim_{a->0+} per_a(A) / a.

Rather than enumerating n! permutations, both quantities are computed by
a cycle-sum dynamic program over subsets:

    cyp(A[S])   via paths from min(S) through S (Held-Karp style),
    per_a(A[S]) = a * sum_{C <= S, min(S) in C} cyp(A[C]) per_a(A[S \\ C]),

which costs O(2^n n^2) + O(3^n) and is validated in the test suite
against a literal permutation enumerator.  Sizes are capped (default 11)
and exceeding the cap raises; there is never a silent fallback to an
approximation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .kernels import Kernel, gram, kernel_column, kernel_eval

__all__ = [
    "EXACT_SIZE_CAP",
    "ExactSizeLimitError",
    "Partition",
    "per_alpha_exact",
    "per_alpha_brute",
    "cyp_exact",
    "ratio_exact",
    "ratio_exact_matrix",
    "cyclic_ratio_exact",
    "label_probability_exact",
    "partition_probability_exact",
    "iter_set_partitions",
    "ewens_probability",
    "rising_factorial",
]

EXACT_SIZE_CAP = 11


class ExactSizeLimitError(ValueError):
    """Raised when a matrix exceeds the exact size limit."""


def _check_square(A) -> np.ndarray:
    m = np.asarray(A, dtype=float)
    if m.size == 0:
        return m.reshape(0, 0)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    return m


def _check_cap(n: int, cap: int):
    if n > cap:
        raise ExactSizeLimitError(
            f"exact size limit: n = {n} exceeds the cap of {cap}; "
            f"raise the cap explicitly or use a cyclic approximation"
        )


def _cyp_subsets(A: np.ndarray) -> np.ndarray:
    """cyp(A[S]) for every nonempty subset S, indexed by bitmask.

    f[S, j] accumulates products over paths that start at min(S), visit
    all of S, and end at j; closing the path back to min(S) gives the
    cycle sum.  Rows of f are full length n with zeros off-support, so
    the transition is a single dot with a column of A.
    """
    n = A.shape[0]
    cols = [np.ascontiguousarray(A[:, j]) for j in range(n)]
    size = 1 << n
    f = np.zeros((size, n))
    cyp = np.empty(size)
    cyp[0] = np.nan
    lowbit = [0] * size
    for s in range(n):
        f[1 << s, s] = 1.0
    for S in range(1, size):
        low = (S & -S).bit_length() - 1
        lowbit[S] = low
        rest = S & ~(1 << low)
        if rest:
            j = rest
            while j:
                jb = j & -j
                jidx = jb.bit_length() - 1
                f[S, jidx] = f[S ^ jb] @ cols[jidx]
                j ^= jb
        cyp[S] = f[S] @ cols[low]
    return cyp


_SPLIT_CACHE: dict[int, list] = {}


def _split_pairs(n: int) -> list:
    """For each subset S: masks C containing min(S) paired with S \\ C."""
    if n in _SPLIT_CACHE:
        return _SPLIT_CACHE[n]
    size = 1 << n
    pairs: list = [None] * size
    for S in range(1, size):
        lowb = S & -S
        rest = S ^ lowb
        cs, rs = [], []
        T = rest
        while True:
            cs.append(T | lowb)
            rs.append(rest ^ T)
            if T == 0:
                break
            T = (T - 1) & rest
        pairs[S] = (np.array(cs, dtype=np.intp), np.array(rs, dtype=np.intp))
    _SPLIT_CACHE[n] = pairs
    return pairs


def per_alpha_exact(A, alpha: float, cap: int = EXACT_SIZE_CAP) -> float:
    """Exact alpha-permanent of a square matrix; the 0 x 0 case is 1."""
    m = _check_square(A)
    n = m.shape[0]
    if n == 0:
        return 1.0
    _check_cap(n, cap)
    cyp = _cyp_subsets(m)
    pairs = _split_pairs(n)
    size = 1 << n
    per = np.empty(size)
    per[0] = 1.0
    a = float(alpha)
    for S in range(1, size):
        cmask, rmask = pairs[S]
        per[S] = a * (cyp[cmask] @ per[rmask])
    return float(per[size - 1])


def per_alpha_brute(A, alpha: float, cap: int = 9) -> float:
    """Literal permutation enumeration with cycle counting.

    Compensated summation over all n! terms; kept as the obviously
    correct reference for validating the subset dynamic program.
    """
    m = _check_square(A)
    n = m.shape[0]
    if n == 0:
        return 1.0
    _check_cap(n, cap)
    rows = m.tolist()
    terms = []
    for sigma in itertools.permutations(range(n)):
        prod = 1.0
        for i in range(n):
            prod *= rows[i][sigma[i]]
        seen = [False] * n
        cycles = 0
        for i in range(n):
            if not seen[i]:
                cycles += 1
                j = i
                while not seen[j]:
                    seen[j] = True
                    j = sigma[j]
        terms.append(alpha**cycles * prod)
    return math.fsum(terms)


def cyp_exact(A, cap: int = EXACT_SIZE_CAP) -> float:
    """Sum of cyclic products: permutations with a single cycle.

    Undefined for the empty matrix (raises); the 1 x 1 case is A[0, 0].
    """
    m = _check_square(A)
    n = m.shape[0]
    if n == 0:
        raise ValueError("cyclic product sum is undefined for an empty matrix")
    _check_cap(n, cap)
    cyp = _cyp_subsets(m)
    return float(cyp[(1 << n) - 1])


def _augmented(kernel: Kernel, t, points) -> np.ndarray:
    g = gram(kernel, points)
    n = g.n
    out = np.empty((n + 1, n + 1))
    out[:n, :n] = g.entries
    col = kernel_column(kernel, t, g.points) if n else np.zeros(0)
    out[:n, n] = col
    out[n, :n] = col
    out[n, n] = kernel_eval(kernel, t, t)
    return out


def ratio_exact(t, points, kernel: Kernel, alpha: float,
                cap: int = EXACT_SIZE_CAP) -> float:
    """Exact permanental ratio per_a{K(x u t)} / per_a{K(x)}.

    The empty point set gives alpha * K(t, t).
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0] if pts.size else 0
    if n == 0:
        return float(alpha) * kernel_eval(kernel, t, t)
    _check_cap(n + 1, cap)
    aug = _augmented(kernel, t, points)
    denom = per_alpha_exact(aug[:n, :n], alpha, cap=cap)
    if denom == 0.0:
        raise ZeroDivisionError("per_alpha of the training configuration is zero")
    return per_alpha_exact(aug, alpha, cap=cap) / denom


def ratio_exact_matrix(A, alpha: float, cap: int = EXACT_SIZE_CAP) -> float:
    """Exact ratio treating the last index of A as the added point."""
    m = _check_square(A)
    n = m.shape[0]
    if n == 0:
        raise ValueError("ratio needs at least the added point on the diagonal")
    if n == 1:
        return float(alpha) * float(m[0, 0])
    _check_cap(n, cap)
    denom = per_alpha_exact(m[: n - 1, : n - 1], alpha, cap=cap)
    if denom == 0.0:
        raise ZeroDivisionError("per_alpha of the leading block is zero")
    return per_alpha_exact(m, alpha, cap=cap) / denom


def cyclic_ratio_exact(t, points, kernel: Kernel, cap: int = EXACT_SIZE_CAP) -> float:
    """Exact cyclic ratio cyp{K(x u t)} / cyp{K(x)} for n >= 1."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0] if pts.size else 0
    if n == 0:
        raise ValueError("cyclic ratio is undefined for an empty point set")
    _check_cap(n + 1, cap)
    aug = _augmented(kernel, t, points)
    denom = cyp_exact(aug[:n, :n], cap=cap)
    if denom == 0.0:
        raise ZeroDivisionError("cyp of the training configuration is zero")
    return cyp_exact(aug, cap=cap) / denom


def label_probability_exact(points, labels, alphas: Sequence[float],
                            kernel: Kernel, cap: int = EXACT_SIZE_CAP) -> float:
    """Probability of a label vector given features, all factors exact.

    prod_r per_{a_r}{K(x^(r))} / per_{a_.}{K(x)} with the convention that
    the permanent over an empty class is 1.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    y = np.asarray(labels, dtype=int)
    n = pts.shape[0]
    if y.shape[0] != n:
        raise ValueError("labels must match the point count")
    k = len(alphas)
    if n and (y.min() < 0 or y.max() >= k):
        raise ValueError(f"labels must lie in 0..{k - 1}")
    _check_cap(n, cap)
    num = 1.0
    for r in range(k):
        idx = np.flatnonzero(y == r)
        if idx.size:
            g = gram(kernel, pts[idx])
            num *= per_alpha_exact(g.entries, alphas[r], cap=cap)
    total = gram(kernel, pts)
    denom = per_alpha_exact(total.entries, float(sum(alphas)), cap=cap)
    if denom == 0.0:
        raise ZeroDivisionError("per_alpha of the full configuration is zero")
    return num / denom


@dataclass(frozen=True)
class Partition:
    """Set partition of {0..n-1} into disjoint nonempty blocks."""

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen: set[int] = set()
        for b in self.blocks:
            if not b:
                raise ValueError("partition blocks must be nonempty")
            if seen & set(b):
                raise ValueError("partition blocks must be disjoint")
            seen |= set(b)
        if seen != set(range(len(seen))):
            raise ValueError("partition blocks must cover 0..n-1 without gaps")

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]]) -> "Partition":
        canon = tuple(sorted((tuple(sorted(int(i) for i in b)) for b in blocks),
                             key=lambda b: b[0]))
        return cls(canon)

    @classmethod
    def from_labels(cls, assignments: Sequence[int]) -> "Partition":
        groups: dict[int, list[int]] = {}
        for i, a in enumerate(assignments):
            groups.setdefault(int(a), []).append(i)
        return cls.from_blocks(groups.values())

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)


def partition_probability_exact(points, partition: Partition, lam: float,
                                kernel: Kernel, cap: int = EXACT_SIZE_CAP) -> float:
    """Probability of an unlabelled partition under the infinite-class model.

    lambda^{#B} prod_b cyp{K(x^(b))} / per_lambda{K(x)}.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    n = pts.shape[0]
    if partition.n != n:
        raise ValueError("partition must cover exactly the given points")
    _check_cap(n, cap)
    num = lam**partition.block_count
    for b in partition.blocks:
        g = gram(kernel, pts[list(b)])
        num *= cyp_exact(g.entries, cap=cap)
    denom = per_alpha_exact(gram(kernel, pts).entries, lam, cap=cap)
    if denom == 0.0:
        raise ZeroDivisionError("per_lambda of the full configuration is zero")
    return num / denom


def iter_set_partitions(n: int) -> Iterator[Partition]:
    """All set partitions of {0..n-1} via restricted growth strings."""
    if n == 0:
        yield Partition(())
        return

    def grow(code: list[int], maxb: int) -> Iterator[list[int]]:
        if len(code) == n:
            yield code
            return
        for b in range(maxb + 2):
            yield from grow(code + [b], max(maxb, b))

    for code in grow([0], 0):
        yield Partition.from_labels(code)


def rising_factorial(x: float, n: int) -> float:
    """x (x + 1) ... (x + n - 1); empty product is 1."""
    out = 1.0
    for i in range(n):
        out *= x + i
    return out


def ewens_probability(sizes: Sequence[int], lam: float) -> float:
    """Ewens sampling probability of a partition with the given block sizes."""
    n = int(sum(sizes))
    out = lam ** len(sizes) / rising_factorial(lam, n)
    for s in sizes:
        out *= math.factorial(int(s) - 1)
    return out
