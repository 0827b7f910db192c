"""Covariance functions and Gram matrices.

A kernel here is a symmetric, elementwise nonnegative covariance function
evaluated on pairs of feature vectors.  Nonnegativity is what lets the
permanental model run at arbitrary positive mass parameters, so every
family enforces it at construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping, Sequence

import numpy as np

__all__ = [
    "KernelFamily",
    "Kernel",
    "GramMatrix",
    "kernel_eval",
    "kernel_column",
    "gram",
]


class KernelFamily(str, Enum):
    EXPONENTIAL = "exponential"
    GAUSSIAN = "gaussian"
    DIAGONAL_INDICATOR = "diagonal_indicator"
    CONSTANT = "constant"
    BLOCK_CONSTANT = "block_constant"
    PROJECTION_MATRIX = "projection_matrix"


def _as_point(p) -> np.ndarray:
    q = np.asarray(p, dtype=float)
    if q.ndim == 0:
        q = q.reshape(1)
    if q.ndim != 1:
        raise ValueError(f"feature vector must be one-dimensional, got shape {q.shape}")
    return q


def _as_points(points) -> np.ndarray:
    q = np.asarray(points, dtype=float)
    if q.size == 0:
        return q.reshape(0, q.shape[-1] if q.ndim == 2 else 1)
    if q.ndim == 1:
        q = q.reshape(-1, 1)
    if q.ndim != 2:
        raise ValueError(f"point set must be a 2-d array, got shape {q.shape}")
    return q


def _key(p) -> tuple[float, ...]:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(p, dtype=float)))


@dataclass
class Kernel:
    """Covariance function specification, plain data so configs round-trip.

    ``tau`` is the length scale for the exponential/gaussian families and
    ``c`` the level for the constant family (and the fallback level for
    block-constant and diagonal-indicator kernels).  ``aux`` carries the
    family-specific payload: a point-to-value table for diagonal-indicator
    kernels, a point-to-block assignment plus per-block levels for
    block-constant kernels, and an explicit matrix over an indexed ground
    set for projection kernels.
    """

    family: KernelFamily
    tau: float | None = None
    c: float | None = None
    aux: dict[str, Any] | None = None

    def __post_init__(self):
        self.family = KernelFamily(self.family)
        if self.family in (KernelFamily.EXPONENTIAL, KernelFamily.GAUSSIAN):
            if self.tau is None or not self.tau > 0:
                raise ValueError(f"{self.family.value} kernel requires tau > 0, got {self.tau}")
        if self.family is KernelFamily.CONSTANT:
            if self.c is None or not self.c > 0:
                raise ValueError(f"constant kernel requires c > 0, got {self.c}")

    # -- constructors -------------------------------------------------

    @classmethod
    def exponential(cls, tau: float) -> "Kernel":
        """k(s, t) = exp(-||s - t|| / tau)."""
        return cls(KernelFamily.EXPONENTIAL, tau=tau)

    @classmethod
    def gaussian(cls, tau: float) -> "Kernel":
        """k(s, t) = exp(-||s - t||^2 / tau^2)."""
        return cls(KernelFamily.GAUSSIAN, tau=tau)

    @classmethod
    def constant(cls, c: float) -> "Kernel":
        """k(s, t) = c everywhere."""
        return cls(KernelFamily.CONSTANT, c=c)

    @classmethod
    def diagonal_indicator(cls, default: float | None = None,
                           table: Mapping[Any, float] | None = None) -> "Kernel":
        """k(s, t) = f(t) when s == t exactly and 0 otherwise.

        ``f`` is looked up in ``table`` (point tuple -> value) with
        ``default`` as fallback.
        """
        tab = {_key(p): float(v) for p, v in (table or {}).items()}
        for v in tab.values():
            if v < 0:
                raise ValueError("diagonal values must be nonnegative")
        if default is not None and default < 0:
            raise ValueError("diagonal default must be nonnegative")
        return cls(KernelFamily.DIAGONAL_INDICATOR, c=default, aux={"table": tab})

    @classmethod
    def block_constant(cls, assignment: Mapping[Any, Any],
                       levels: Mapping[Any, float] | None = None,
                       c: float | None = None) -> "Kernel":
        """k(s, t) = c_b when s and t share block b, 0 otherwise.

        ``assignment`` maps point tuples to block ids; ``levels`` gives the
        per-block level c_b (fallback ``c`` for unlabelled blocks).
        """
        asg = {_key(p): b for p, b in assignment.items()}
        lv = {b: float(v) for b, v in (levels or {}).items()}
        for v in lv.values():
            if v < 0:
                raise ValueError("block levels must be nonnegative")
        return cls(KernelFamily.BLOCK_CONSTANT, c=c, aux={"assignment": asg, "levels": lv})

    @classmethod
    def projection(cls, matrix, points: Sequence) -> "Kernel":
        """Explicit finite matrix over an indexed ground set (counting measure).

        The matrix must be square, symmetric, and elementwise nonnegative;
        evaluation outside the ground set is an error.
        """
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"projection matrix must be square, got shape {m.shape}")
        if len(points) != m.shape[0]:
            raise ValueError("ground set size must match the matrix dimension")
        if not np.array_equal(m, m.T):
            raise ValueError("projection matrix must be symmetric")
        if (m < 0).any():
            raise ValueError("kernel matrices must be elementwise nonnegative")
        keys = [_key(p) for p in points]
        if len(set(keys)) != len(keys):
            raise ValueError("ground set points must be distinct")
        return cls(KernelFamily.PROJECTION_MATRIX,
                   aux={"matrix": m.tolist(), "points": keys})

    # -- evaluation helpers -------------------------------------------

    def _diag_value(self, key) -> float:
        tab = self.aux["table"] if self.aux else {}
        if key in tab:
            return tab[key]
        if self.c is None:
            raise ValueError(f"diagonal-indicator kernel has no value for point {key}")
        return float(self.c)

    def _block_of(self, key):
        asg = self.aux["assignment"]
        if key not in asg:
            return None
        return asg[key]

    def _block_level(self, block) -> float:
        lv = self.aux["levels"]
        if block in lv:
            return lv[block]
        if self.c is None:
            raise ValueError(f"block-constant kernel has no level for block {block!r}")
        return float(self.c)

    def _proj_index(self, key) -> int:
        pts = self.aux["points"]
        try:
            return pts.index(key)
        except ValueError:
            raise ValueError(f"point {key} is not in the projection kernel ground set") from None

    # -- serialization ------------------------------------------------

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"family": self.family.value}
        if self.tau is not None:
            out["tau"] = self.tau
        if self.c is not None:
            out["c"] = self.c
        if self.aux is not None:
            aux: dict[str, Any] = {}
            if "table" in self.aux:
                aux["table"] = [[list(k), v] for k, v in sorted(self.aux["table"].items())]
            if "assignment" in self.aux:
                aux["assignment"] = [[list(k), b] for k, b in sorted(self.aux["assignment"].items())]
                aux["levels"] = [[b, v] for b, v in sorted(self.aux["levels"].items(), key=lambda kv: str(kv[0]))]
            if "matrix" in self.aux:
                aux["matrix"] = self.aux["matrix"]
                aux["points"] = [list(k) for k in self.aux["points"]]
            out["aux"] = aux
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Kernel":
        family = KernelFamily(d["family"])
        tau = d.get("tau")
        c = d.get("c")
        aux_in = d.get("aux")
        if family is KernelFamily.DIAGONAL_INDICATOR:
            table = {tuple(k): v for k, v in (aux_in or {}).get("table", [])}
            return cls.diagonal_indicator(default=c, table=table)
        if family is KernelFamily.BLOCK_CONSTANT:
            assignment = {tuple(k): b for k, b in (aux_in or {}).get("assignment", [])}
            levels = {b: v for b, v in (aux_in or {}).get("levels", [])}
            return cls.block_constant(assignment, levels, c=c)
        if family is KernelFamily.PROJECTION_MATRIX:
            return cls.projection(aux_in["matrix"], [tuple(p) for p in aux_in["points"]])
        return cls(family, tau=tau, c=c)


def kernel_eval(kernel: Kernel, s, t) -> float:
    """Evaluate k(s, t).  Symmetric and nonnegative for every family."""
    sv, tv = _as_point(s), _as_point(t)
    if sv.shape != tv.shape:
        raise ValueError(f"dimension mismatch: {sv.shape[0]} vs {tv.shape[0]}")
    fam = kernel.family
    if fam is KernelFamily.EXPONENTIAL:
        return float(np.exp(-np.linalg.norm(sv - tv) / kernel.tau))
    if fam is KernelFamily.GAUSSIAN:
        delta = sv - tv
        return float(np.exp(-float(delta @ delta) / kernel.tau**2))
    if fam is KernelFamily.CONSTANT:
        return float(kernel.c)
    if fam is KernelFamily.DIAGONAL_INDICATOR:
        return kernel._diag_value(_key(tv)) if np.array_equal(sv, tv) else 0.0
    if fam is KernelFamily.BLOCK_CONSTANT:
        bs, bt = kernel._block_of(_key(sv)), kernel._block_of(_key(tv))
        if bs is None or bt is None or bs != bt:
            return 0.0
        return kernel._block_level(bs)
    if fam is KernelFamily.PROJECTION_MATRIX:
        i, j = kernel._proj_index(_key(sv)), kernel._proj_index(_key(tv))
        return float(kernel.aux["matrix"][i][j])
    raise ValueError(f"unknown kernel family {fam!r}")


def kernel_self(kernel: Kernel, t) -> float:
    """k(t, t) without the generic two-point path (it is 1 for the
    distance families and a plain lookup for the rest)."""
    fam = kernel.family
    if fam in (KernelFamily.EXPONENTIAL, KernelFamily.GAUSSIAN):
        return 1.0
    if fam is KernelFamily.CONSTANT:
        return float(kernel.c)
    return kernel_eval(kernel, t, t)


def kernel_column(kernel: Kernel, t, points) -> np.ndarray:
    """Vector of k(t, x_i) over a point set, vectorized where it pays off."""
    pts = _as_points(points)
    tv = _as_point(t)
    n = pts.shape[0]
    if n == 0:
        return np.zeros(0)
    if pts.shape[1] != tv.shape[0]:
        raise ValueError(f"dimension mismatch: query is {tv.shape[0]}-d, points are {pts.shape[1]}-d")
    fam = kernel.family
    if fam is KernelFamily.EXPONENTIAL:
        delta = pts - tv
        sq = np.einsum("ij,ij->i", delta, delta)
        np.sqrt(sq, out=sq)
        sq /= -kernel.tau
        return np.exp(sq, out=sq)
    if fam is KernelFamily.GAUSSIAN:
        delta = pts - tv
        sq = np.einsum("ij,ij->i", delta, delta)
        sq /= -kernel.tau**2
        return np.exp(sq, out=sq)
    if fam is KernelFamily.CONSTANT:
        return np.full(n, float(kernel.c))
    return np.array([kernel_eval(kernel, tv, p) for p in pts])


@dataclass
class GramMatrix:
    """Symmetric nonnegative matrix of kernel values over a point set.

    Immutable after construction; safe for concurrent reads.  ``kernel`` is
    kept so downstream predictors can evaluate query columns against the
    same covariance; it is ``None`` for matrices ingested directly.
    """

    entries: np.ndarray
    points: np.ndarray
    kernel: Kernel | None = None

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        self.points = _as_points(self.points)
        n = self.entries.shape[0]
        if self.entries.shape != (n, n):
            raise ValueError(f"gram matrix must be square, got shape {self.entries.shape}")
        if self.points.shape[0] != n:
            raise ValueError("gram matrix size must match the point count")

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return self.entries.diagonal()

    @classmethod
    def from_matrix(cls, matrix) -> "GramMatrix":
        """Wrap a raw symmetric nonnegative matrix (points are index stubs)."""
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"matrix must be square, got shape {m.shape}")
        if not np.array_equal(m, m.T):
            raise ValueError("matrix must be exactly symmetric")
        pts = np.arange(m.shape[0], dtype=float).reshape(-1, 1)
        return cls(entries=m, points=pts, kernel=None)


def gram(kernel: Kernel, points) -> GramMatrix:
    """Build the Gram matrix K(x) over a point set.

    Entries are exactly symmetric; gaussian/exponential diagonals are
    exactly 1.  An empty point set yields the 0 x 0 matrix (its
    alpha-permanent is 1 downstream).
    """
    pts = _as_points(points)
    n = pts.shape[0]
    fam = kernel.family
    if fam in (KernelFamily.EXPONENTIAL, KernelFamily.GAUSSIAN):
        sq = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        sq = 0.5 * (sq + sq.T)
        if fam is KernelFamily.GAUSSIAN:
            entries = np.exp(-sq / kernel.tau**2)
        else:
            entries = np.exp(-np.sqrt(np.maximum(sq, 0.0)) / kernel.tau)
        np.fill_diagonal(entries, 1.0)
    elif fam is KernelFamily.CONSTANT:
        entries = np.full((n, n), float(kernel.c))
    else:
        entries = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                v = kernel_eval(kernel, pts[i], pts[j])
                entries[i, j] = entries[j, i] = v
    if n and (entries < 0).any():
        raise ValueError("kernel produced a negative Gram entry")
    return GramMatrix(entries=entries, points=pts, kernel=kernel)
