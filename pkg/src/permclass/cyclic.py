"""Polynomial-time cyclic approximations to permanental ratios.

The ratio R_n(t; x) = per_a{K(x u t)} / per_a{K(x)} expands by the length
of the cycle containing t.  Truncating at cycles of length k + 1, with the
inner leave-one-out ratios approximated at order k - 1, gives the order-k
approximation:

    k = 0 (uni-cycle):   a K(t,t)
    k = 1 (two-cycle):   a K(t,t) + sum_i K(t,x_i)^2 / K(x_i,x_i)
    k = 2 (three-cycle): adds terms K(t,x_i) K(x_i,x_j) K(x_j,t)
    k = 3 (four-cycle):  adds terms through K(t,x_i) K(x_i,x_j) K(x_j,x_k) K(x_k,t)

Per query the cost is O(1), O(n), O(n^2), O(n^3) for k = 0..3; the nested
sums are evaluated as displayed, with denominators taken from tables built
once per training set (leave-one-out and leave-two-out ratios at the next
lower order).  Order k = n is exact and larger exact sizes are served by
the oracle layer, not here.

The a -> 0+ limits C^(k) are evaluated by running the same recursion over
truncated power series in a (`GradedValue`), so configurations where the
naive limit is 0/0 (e.g. diagonal kernels over distinct points) still get
their finite limiting value.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from numbers import Real

import numpy as np

from .kernels import GramMatrix, Kernel, gram, kernel_column, kernel_self

__all__ = [
    "MAX_ORDER",
    "EXACT_ORDER",
    "DegenerateConfigurationError",
    "GradedValue",
    "ALPHA",
    "RatioTable",
    "build_ratio_table",
    "ratio_approx",
    "ratio_from_kt",
    "ratio_approx_matrix",
    "per_alpha_cyclic",
    "cyclic_ratio_approx",
    "cyclic_ratio_from_kt",
    "cyclic_ratio_smallalpha",
    "GramStructure",
    "closed_form_ratio",
    "closed_form_ratio_matrix",
]

MAX_ORDER = 3
EXACT_ORDER = "exact"

# Off-diagonal density below which the four-cycle query walks explicit
# nonzero neighbour lists instead of dense contractions.  Zero terms are
# skipped either way; results agree to rounding.
_SPARSE_DENSITY = 0.25


class DegenerateConfigurationError(ArithmeticError):
    """A small-mass limit hit a quantity that vanishes identically."""


log = logging.getLogger(__name__)


def _surface(value: float, order: int) -> float:
    # it is open whether orders >= 2 stay nonnegative off the kernel cone;
    # negative values are reported, never clamped
    if value < 0.0:
        log.warning("order-%d ratio approximation is negative (%.6g)",
                    order, value)
    return value


# ---------------------------------------------------------------------------
# truncated power series in alpha
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GradedValue:
    """Value of the form alpha^lead (c0 + c1 alpha + O(alpha^2)).

    Two coefficients are tracked, which is enough to extract the constant
    term of every ratio formula here: intermediate leads dip to -1 only
    through the innermost uni-cycle denominators and are lifted back by
    the leading alpha factor.  The exact zero is canonically
    ``GradedValue(0, 0.0, 0.0)``.  If leading coefficients ever cancel,
    the lead is shifted and the next coefficient is no longer tracked;
    the recursions here only ever add nonnegative terms, so this is a
    safety net rather than a code path.
    """

    lead: int
    c0: float
    c1: float = 0.0

    @staticmethod
    def of(value: float) -> "GradedValue":
        return _normalize(0, float(value), 0.0)

    @property
    def is_zero(self) -> bool:
        return self.c0 == 0.0 and self.c1 == 0.0

    def limit(self) -> float:
        """Value at alpha -> 0+."""
        if self.is_zero or self.lead > 0:
            return 0.0
        if self.lead == 0:
            return self.c0
        raise DegenerateConfigurationError(
            "ratio diverges in the small-mass limit (leading power "
            f"{self.lead}); the configuration is degenerate"
        )

    def at(self, alpha: float) -> float:
        """Evaluate the tracked part at a concrete alpha (for diagnostics)."""
        return alpha**self.lead * (self.c0 + self.c1 * alpha)

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        other = _lift(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        a, b = (self, other) if self.lead <= other.lead else (other, self)
        gap = b.lead - a.lead
        if gap == 0:
            return _normalize(a.lead, a.c0 + b.c0, a.c1 + b.c1)
        if gap == 1:
            return _normalize(a.lead, a.c0, a.c1 + b.c0)
        return a

    __radd__ = __add__

    def __neg__(self):
        return GradedValue(self.lead, -self.c0, -self.c1)

    def __sub__(self, other):
        other = _lift(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return _lift(other) + (-self)

    def __mul__(self, other):
        other = _lift(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_zero or other.is_zero:
            return _ZERO
        return _normalize(self.lead + other.lead,
                          self.c0 * other.c0,
                          self.c0 * other.c1 + self.c1 * other.c0)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _lift(other)
        if other is NotImplemented:
            return NotImplemented
        if other.is_zero:
            raise DegenerateConfigurationError(
                "division by a quantity that is identically zero to tracked "
                "order; the configuration is degenerate"
            )
        if self.is_zero:
            return _ZERO
        b0, b1 = other.c0, other.c1
        return _normalize(self.lead - other.lead,
                          self.c0 / b0,
                          (self.c1 * b0 - self.c0 * b1) / (b0 * b0))

    def __rtruediv__(self, other):
        return _lift(other) / self


def _normalize(lead: int, c0: float, c1: float) -> GradedValue:
    if c0 == 0.0:
        if c1 == 0.0:
            return GradedValue(0, 0.0, 0.0)
        return GradedValue(lead + 1, c1, 0.0)
    return GradedValue(lead, c0, c1)


def _lift(x):
    if isinstance(x, GradedValue):
        return x
    if isinstance(x, Real):
        return GradedValue.of(float(x))
    return NotImplemented


_ZERO = GradedValue(0, 0.0, 0.0)
ALPHA = GradedValue(1, 1.0, 0.0)


# ---------------------------------------------------------------------------
# denominator tables
# ---------------------------------------------------------------------------


@dataclass
class RatioTable:
    """Fit-time denominators for a fixed training configuration.

    r1_loo[i]     two-cycle ratio of x_i against the other points,
    r1_l2o[i, j]  two-cycle ratio of x_j against the points minus {i, j}
                  (diagonal entries are inert placeholders),
    r2_loo[i]     three-cycle ratio of x_i against the other points.

    All entries are strictly positive for positive alpha and a positive
    Gram diagonal.  Tables depend only on the training points, never on
    the query, and are immutable once built.
    """

    gram: GramMatrix
    alpha: float
    order: int
    r1_loo: np.ndarray
    r1_l2o: np.ndarray | None = None
    r2_loo: np.ndarray | None = None
    _lists: dict = field(default_factory=dict, repr=False)
    _t3: np.ndarray | None = field(default=None, repr=False)
    _nbrs: list | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.gram.n


def build_ratio_table(g: GramMatrix, alpha: float, order: int = MAX_ORDER) -> RatioTable:
    """Precompute leave-one-out and leave-two-out denominators.

    r1_loo costs O(n^2); for order >= 2 the leave-two-out table and the
    three-cycle leave-one-out table are added at O(n^2) and O(n^3).
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if order not in (0, 1, 2, 3):
        raise ValueError(f"order must be in 0..3, got {order}")
    G = g.entries
    n = g.n
    d = G.diagonal().copy()
    bad = np.flatnonzero(d <= 0)
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"gram diagonal must be strictly positive; point index {i} has "
            f"K(x, x) = {d[i]}"
        )
    a = float(alpha)
    if n == 0:
        empty = np.zeros(0)
        return RatioTable(g, a, order, empty, empty.reshape(0, 0), empty)

    Q = (G * G) / d[None, :]            # Q[i, m] = K(x_i, x_m)^2 / K(x_m, x_m)
    Qoff = Q.copy()
    np.fill_diagonal(Qoff, 0.0)
    r1_loo = a * d + Qoff.sum(axis=1)

    table = RatioTable(g, a, order, r1_loo)
    if order >= 2:
        # r1_l2o[i, j] removes the i term from r1_loo[j]
        r1_l2o = r1_loo[None, :] - Qoff.T
        np.fill_diagonal(r1_l2o, 1.0)
        r2_loo = np.empty(n)
        for i in range(n):
            u = G[:, i] / d
            su = G @ u
            inner = su - G[:, i] * u[i] - d * u      # excludes l = i and l = m
            contrib = (a * G[:, i] ** 2 + G[:, i] * inner) / r1_l2o[i]
            r2_loo[i] = a * d[i] + contrib.sum() - contrib[i]
        table.r1_l2o = r1_l2o
        table.r2_loo = r2_loo
        t3 = G / r1_l2o
        np.fill_diagonal(t3, 0.0)
        table._t3 = t3
        offdiag = G.copy()
        np.fill_diagonal(offdiag, 0.0)
        nnz = int(np.count_nonzero(offdiag))
        if n > 1 and nnz <= _SPARSE_DENSITY * n * (n - 1):
            table._nbrs = [np.flatnonzero(offdiag[j]).tolist() for j in range(n)]
    table._lists = {
        "G": G.tolist(),
        "d": d.tolist(),
        "r1_loo": r1_loo.tolist(),
    }
    return table


def _require(table: RatioTable, order: int):
    if order not in (0, 1, 2, 3):
        raise ValueError(f"order must be in 0..3, got {order}")
    if table.order < order - 1:
        raise ValueError(
            f"table was built at order {table.order} and cannot serve "
            f"order-{order} queries; rebuild with order >= {order - 1}"
        )
    if order == 3 and table.r2_loo is None:
        raise ValueError("order-3 queries need the leave-two-out tables; "
                         "rebuild with order >= 2")


def ratio_from_kt(table: RatioTable, kt, ktt: float, order: int | None = None) -> float:
    """Order-k ratio given the query's kernel column and diagonal value.

    This is the matrix-level entry point: `kt[i] = K(t, x_i)` and
    ``ktt = K(t, t)``.  Values can be negative only if a caller feeds a
    non-kernel matrix; they are returned as computed, never clamped.
    """
    if order is None:
        order = table.order
    _require(table, order)
    a = table.alpha
    n = table.n
    kt = np.asarray(kt, dtype=float)
    if kt.shape != (n,):
        raise ValueError(f"kernel column must have length {n}, got {kt.shape}")
    base = a * float(ktt)
    if order == 0 or n == 0:
        return base
    lists = table._lists
    dl = lists["d"]
    ktl = kt.tolist()
    if order == 1:
        return base + math.fsum(ktl[i] * ktl[i] / dl[i] for i in range(n))
    if order == 2:
        Gl = lists["G"]
        r1 = lists["r1_loo"]
        total = base
        for i in range(n):
            kti = ktl[i]
            if kti == 0.0:
                continue
            gi = Gl[i]
            inner = 0.0
            for j in range(n):
                if j == i:
                    continue
                gij = gi[j]
                if gij == 0.0:
                    continue
                inner += gij * ktl[j] / dl[j]
            total += (a * kti * kti + kti * inner) / r1[i]
        return _surface(total, 2)
    return _surface(_four_cycle(table, kt, base), 3)


def _four_cycle(table: RatioTable, kt: np.ndarray, base: float) -> float:
    G = table.gram.entries
    d = table.gram.diagonal
    a = table.alpha
    w = kt / (a * d)
    if table._nbrs is not None:
        return base + _four_cycle_sparse(table, kt.tolist(), w.tolist())
    T = table._t3
    e3 = T @ kt
    e4 = np.einsum("ij,jk,k->i", T, G, w, optimize=False)
    # remove the k = i and k = j terms included by the dense contraction
    e4 -= w * (T * G).sum(axis=1)
    e4 -= T @ (d * w)
    coeff = a * kt / table.r2_loo
    return base + float(coeff @ (kt + e3 + e4))


def _four_cycle_sparse(table: RatioTable, ktl: list, wl: list) -> float:
    Gl = table._lists["G"]
    n = table.n
    r2 = table.r2_loo
    r1_l2o = table.r1_l2o
    nbrs = table._nbrs
    a = table.alpha
    total = 0.0
    for i in range(n):
        kti = ktl[i]
        if kti == 0.0:
            continue
        gi = Gl[i]
        r1row = r1_l2o[i]
        inner = 0.0
        for j in nbrs[i]:
            gj = Gl[j]
            s = ktl[j]
            for k in nbrs[j]:
                if k != i:
                    s += gj[k] * wl[k]
            inner += gi[j] / r1row[j] * s
        total += a * kti * (kti + inner) / r2[i]
    return total


def ratio_approx(t, points, table: RatioTable, order: int | None = None) -> float:
    """Order-k approximation of R_n(t; x) for a query feature vector."""
    kernel = table.gram.kernel
    if kernel is None:
        raise ValueError("table was built from a raw matrix; use ratio_from_kt "
                         "with an explicit kernel column")
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.shape[0] != table.n:
        raise ValueError("point set does not match the table's training size")
    ktt = kernel_self(kernel, t)
    if order == 0:
        _require(table, 0)
        return table.alpha * ktt
    kt = kernel_column(kernel, t, table.gram.points)
    return ratio_from_kt(table, kt, ktt, order)


def ratio_approx_matrix(A, alpha: float, order: int = MAX_ORDER) -> float:
    """Order-k ratio over a raw matrix, last index treated as the query."""
    m = np.asarray(A, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValueError(f"need a nonempty square matrix, got shape {m.shape}")
    n = m.shape[0] - 1
    table = build_ratio_table(GramMatrix.from_matrix(m[:n, :n]), alpha, order=order)
    return ratio_from_kt(table, m[n, :n], float(m[n, n]), order)


def per_alpha_cyclic(A, alpha: float, order: int = MAX_ORDER) -> float:
    """Approximate per_a(A) as a telescoping product of order-k ratios.

    per_a(A) = prod_m R_{m-1}(x_m; x_{1..m-1}) with each factor replaced
    by its order-k approximation; polynomial cost, unlike the exact sum.
    """
    m = np.asarray(A, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    out = 1.0
    for size in range(m.shape[0]):
        table = build_ratio_table(GramMatrix.from_matrix(m[:size, :size]),
                                  alpha, order=order)
        out *= ratio_from_kt(table, m[size, :size], float(m[size, size]), order)
    return out


# ---------------------------------------------------------------------------
# generic recursion (floats or GradedValue), used for the alpha -> 0 limit
# ---------------------------------------------------------------------------


def _generic_tables(Gl, dl, alpha, order):
    n = len(dl)
    r1_loo = []
    for i in range(n):
        s = math.fsum(Gl[i][m] * Gl[i][m] / dl[m] for m in range(n) if m != i)
        r1_loo.append(alpha * dl[i] + s)
    if order < 3:
        return r1_loo, None, None
    r1_l2o = []
    for i in range(n):
        row = []
        for j in range(n):
            if j == i:
                row.append(None)
                continue
            s = math.fsum(Gl[j][m] * Gl[j][m] / dl[m]
                          for m in range(n) if m != i and m != j)
            row.append(alpha * dl[j] + s)
        r1_l2o.append(row)
    r2_loo = []
    for i in range(n):
        acc = alpha * dl[i]
        for m in range(n):
            if m == i:
                continue
            gim = Gl[i][m]
            inner = math.fsum(Gl[m][l] * Gl[l][i] / dl[l]
                              for l in range(n) if l != i and l != m)
            acc = acc + (alpha * gim * gim + gim * inner) / r1_l2o[i][m]
        r2_loo.append(acc)
    return r1_loo, r1_l2o, r2_loo


def _generic_ratio(ktt, ktl, Gl, dl, alpha, order, r1_loo, r1_l2o, r2_loo):
    n = len(dl)
    total = alpha * ktt
    if order == 0 or n == 0:
        return total
    if order == 1:
        return total + math.fsum(ktl[i] * ktl[i] / dl[i] for i in range(n))
    if order == 2:
        for i in range(n):
            kti = ktl[i]
            inner = math.fsum(Gl[i][j] * ktl[j] / dl[j] for j in range(n) if j != i)
            total = total + (alpha * kti * kti + kti * inner) / r1_loo[i]
        return total
    for i in range(n):
        kti = ktl[i]
        bracket = kti * kti
        for j in range(n):
            if j == i:
                continue
            gij = Gl[i][j]
            if gij == 0.0 or kti == 0.0:
                continue
            tail = sum((kti * gij * Gl[j][k] * ktl[k]) / (alpha * dl[k])
                       for k in range(n) if k != i and k != j)
            bracket = bracket + (kti * gij * ktl[j] + tail) / r1_l2o[i][j]
        total = total + alpha * bracket / r2_loo[i]
    return total


def cyclic_ratio_from_kt(g: GramMatrix, kt, ktt: float, order: int) -> float:
    """alpha -> 0+ limit of the order-k ratio, via series arithmetic."""
    if order not in (0, 1, 2, 3):
        raise ValueError(f"order must be in 0..3, got {order}")
    n = g.n
    if n == 0:
        raise ValueError("cyclic ratio is undefined for an empty point set")
    d = g.diagonal
    bad = np.flatnonzero(d <= 0)
    if bad.size:
        raise ValueError(f"gram diagonal must be strictly positive; point index "
                         f"{int(bad[0])} has K(x, x) = {d[int(bad[0])]}")
    Gl = g.entries.tolist()
    dl = d.tolist()
    ktl = np.asarray(kt, dtype=float).tolist()
    r1_loo, r1_l2o, r2_loo = _generic_tables(Gl, dl, ALPHA, order)
    value = _generic_ratio(float(ktt), ktl, Gl, dl, ALPHA, order,
                           r1_loo, r1_l2o, r2_loo)
    return _lift(value).limit()


def cyclic_ratio_approx(t, points, g: GramMatrix, order: int) -> float:
    """Order-k approximation of the cyclic ratio C_n(t; x), n >= 1."""
    kernel = g.kernel
    if kernel is None:
        raise ValueError("gram was built from a raw matrix; use "
                         "cyclic_ratio_from_kt with an explicit kernel column")
    kt = kernel_column(kernel, t, g.points)
    ktt = kernel_self(kernel, t)
    return cyclic_ratio_from_kt(g, kt, ktt, order)


def cyclic_ratio_smallalpha(g: GramMatrix, kt, ktt: float, order: int,
                            eps: float = 1e-6) -> float:
    """Numeric cross-check of the limit: Richardson step from eps to eps/10.

    Breaks down on degenerate configurations (that is what the series
    arithmetic is for); kept for validation only.
    """
    vals = []
    for a in (eps, eps / 10.0):
        table = build_ratio_table(g, a, order=max(order, 2) if order >= 2 else order)
        vals.append(ratio_from_kt(table, kt, ktt, order))
    return (10.0 * vals[1] - vals[0]) / 9.0


# ---------------------------------------------------------------------------
# closed forms for structured training matrices
# ---------------------------------------------------------------------------


class GramStructure(str, Enum):
    DIAGONAL = "diagonal"
    CONSTANT = "constant"
    BLOCK_CONSTANT = "block_constant"


def _blocks_of(G: np.ndarray) -> list[list[int]]:
    """Connected components of the nonzero pattern (union by scanning)."""
    n = G.shape[0]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if G[i, j] != 0.0:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda b: b[0])


def _validate_structure(G: np.ndarray, structure: GramStructure) -> list[tuple[list[int], float]]:
    n = G.shape[0]
    if structure is GramStructure.DIAGONAL:
        off = G.copy()
        np.fill_diagonal(off, 0.0)
        if np.count_nonzero(off):
            raise ValueError("matrix is not diagonal")
        return [([i], float(G[i, i])) for i in range(n)]
    if structure is GramStructure.CONSTANT:
        if n == 0:
            return []
        c = float(G[0, 0])
        if c == 0.0 or not np.all(G == c):
            raise ValueError("matrix is not constant with a nonzero level")
        return [(list(range(n)), c)]
    blocks = []
    for b in _blocks_of(G):
        sub = G[np.ix_(b, b)]
        c = float(sub[0, 0])
        if c == 0.0 or not np.all(sub == c):
            raise ValueError(f"block {b} is not constant with a nonzero level")
        blocks.append((b, c))
    for bi, (b, _) in enumerate(blocks):
        for b2, _ in blocks[bi + 1:]:
            if np.count_nonzero(G[np.ix_(b, b2)]):
                raise ValueError("cross-block entries must be zero")
    return blocks


def closed_form_ratio_matrix(G, kt, ktt: float, alpha: float,
                             structure: GramStructure | str) -> float:
    """Closed-form ratio for a structured training matrix.

    For diagonal, constant, or block-constant K(x) the order >= 2
    approximations coincide with the exact ratio:

        a K(t,t) + sum_b [ a sum_{i in b} K(t,x_i)^2
                           + sum_{i != j in b} K(t,x_i) K(t,x_j) ]
                          / ( c_b (a + |b| - 1) )

    The diagonal case reduces to a K(t,t) + sum_i K(t,x_i)^2 / K(x_i,x_i)
    where even the two-cycle approximation is already exact.
    """
    structure = GramStructure(structure)
    m = np.asarray(G, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    ktv = np.asarray(kt, dtype=float)
    if ktv.shape != (m.shape[0],):
        raise ValueError("kernel column must match the matrix size")
    blocks = _validate_structure(m, structure)
    a = float(alpha)
    total = a * float(ktt)
    for b, c in blocks:
        v = ktv[b]
        s1 = float(v @ v)
        s = float(v.sum())
        cross = s * s - s1
        total += (a * s1 + cross) / (c * (a + len(b) - 1))
    return total


def closed_form_ratio(t, points, kernel: Kernel, alpha: float,
                      structure: GramStructure | str) -> float:
    """Closed-form ratio with the training matrix built from a kernel."""
    g = gram(kernel, points)
    kt = kernel_column(kernel, t, g.points)
    ktt = kernel_self(kernel, t)
    return closed_form_ratio_matrix(g.entries, kt, ktt, alpha, structure)
