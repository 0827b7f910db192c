"""Permanental classification, finite and infinite class counts.

Finite mode: a new point joins class r with probability proportional to
the permanental ratio R(t; x^(r)) at that class's mass, or to
alpha_r K(t, t) when the class is still empty.  Infinite mode: a new
point joins block b with probability proportional to the cyclic ratio
C(t; x^(b)) and opens a new block with probability proportional to
lambda K(t, t).  Proportionality is turned into probabilities by
dividing by the total; ties in the argmax go to the lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cyclic import (EXACT_ORDER, MAX_ORDER, RatioTable, build_ratio_table,
                     cyclic_ratio_from_kt, ratio_from_kt)
from .exact import Partition, cyp_exact, ratio_exact
from .kernels import GramMatrix, Kernel, gram, kernel_column, kernel_self

__all__ = [
    "LabeledDataset",
    "ModelParams",
    "FittedModel",
    "PosteriorRow",
    "PosteriorTable",
    "fit",
    "predict_finite",
    "predict",
    "predict_infinite",
    "sequential_partition",
    "knn_predict",
]


@dataclass
class LabeledDataset:
    """Feature vectors with class labels, or with a partition.

    ``labels`` holds integer class codes 0..k-1 (finite mode);
    ``partition`` holds the block structure (infinite mode).  Exactly one
    of the two is set.  ``n_classes`` can exceed the number of observed
    codes so that subsets keep the full class list.
    """

    points: np.ndarray
    labels: np.ndarray | None = None
    n_classes: int = 0
    class_names: tuple[str, ...] = ()
    partition: Partition | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points.reshape(-1, 1)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape[0] != self.points.shape[0]:
                raise ValueError("labels must match the point count")
            observed = int(self.labels.max()) + 1 if self.labels.size else 0
            if self.n_classes == 0:
                self.n_classes = observed
            if self.n_classes < observed:
                raise ValueError("n_classes is smaller than the largest label code")
            if self.labels.size and self.labels.min() < 0:
                raise ValueError("label codes must be nonnegative")
            if not self.class_names:
                self.class_names = tuple(str(r + 1) for r in range(self.n_classes))
        if self.partition is not None and self.partition.n != self.points.shape[0]:
            raise ValueError("partition must cover exactly the given points")

    @classmethod
    def from_arrays(cls, points, labels, n_classes: int = 0) -> "LabeledDataset":
        """Build from raw labels: ints are codes, anything else is encoded
        by sorted distinct value."""
        raw = list(labels)
        if all(isinstance(v, (int, np.integer)) for v in raw):
            codes = np.asarray(raw, dtype=int)
            names = ()
        else:
            names_list = sorted({str(v) for v in raw})
            lookup = {v: i for i, v in enumerate(names_list)}
            codes = np.array([lookup[str(v)] for v in raw], dtype=int)
            names = tuple(names_list)
            n_classes = max(n_classes, len(names_list))
        return cls(points=np.asarray(points, dtype=float), labels=codes,
                   n_classes=n_classes, class_names=names)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1] if self.points.ndim == 2 else 1

    def class_points(self, r: int) -> np.ndarray:
        return self.points[self.labels == r]

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=int)
        return LabeledDataset(points=self.points[idx], labels=self.labels[idx],
                              n_classes=self.n_classes, class_names=self.class_names)


@dataclass
class ModelParams:
    """Model configuration: kernel, per-class masses, block rate, order.

    ``alphas`` is either one shared positive mass or a per-class sequence;
    ``lam`` is the new-block rate for the infinite-class model; ``order``
    is 0..3 for the cyclic approximations or "exact" for the oracle path
    (four-cycle by default).
    """

    kernel: Kernel
    alphas: float | Sequence[float] = 1.0
    lam: float | None = None
    order: int | str = MAX_ORDER

    def __post_init__(self):
        if self.order != EXACT_ORDER and self.order not in (0, 1, 2, 3):
            raise ValueError(f"order must be 0..3 or '{EXACT_ORDER}', got {self.order!r}")
        if self.lam is not None and not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")

    def alpha_vector(self, k: int) -> np.ndarray:
        if np.isscalar(self.alphas):
            out = np.full(k, float(self.alphas))
        else:
            out = np.asarray(self.alphas, dtype=float)
            if out.shape != (k,):
                raise ValueError(f"expected {k} per-class alphas, got {out.shape}")
        if (out <= 0).any():
            raise ValueError("all alphas must be positive")
        return out

    def to_dict(self) -> dict:
        alphas = (float(self.alphas) if np.isscalar(self.alphas)
                  else [float(a) for a in self.alphas])
        out = {"kernel": self.kernel.to_dict(), "alphas": alphas, "order": self.order}
        if self.lam is not None:
            out["lambda"] = self.lam
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(kernel=Kernel.from_dict(d["kernel"]), alphas=d["alphas"],
                   lam=d.get("lambda"), order=d.get("order", MAX_ORDER))


@dataclass
class _ClassState:
    points: np.ndarray
    alpha: float
    gram: GramMatrix | None
    table: RatioTable | None

    @property
    def n(self) -> int:
        return self.points.shape[0]


@dataclass
class FittedModel:
    """Immutable fitted state; predictions are pure and thread-safe."""

    params: ModelParams
    classes: list[_ClassState]
    class_names: tuple[str, ...]
    dim: int

    @property
    def n_classes(self) -> int:
        return len(self.classes)


def fit(data: LabeledDataset, params: ModelParams) -> FittedModel:
    """Build per-class Gram matrices and denominator tables.

    Cost is O(sum_r n_r^3) at order 3.  Empty classes are recorded and
    served by the empty-class rule at prediction time.
    """
    if data.labels is None:
        raise ValueError("finite-class fitting needs labelled data")
    k = data.n_classes
    if k == 0:
        raise ValueError("dataset declares zero classes")
    alphas = params.alpha_vector(k)
    build_order = params.order if params.order != EXACT_ORDER else None
    classes = []
    for r in range(k):
        pts = data.class_points(r)
        if pts.shape[0] == 0:
            classes.append(_ClassState(pts, float(alphas[r]), None, None))
            continue
        g = gram(params.kernel, pts)
        table = None
        if build_order is not None:
            table = build_ratio_table(g, float(alphas[r]), order=build_order)
        classes.append(_ClassState(pts, float(alphas[r]), g, table))
    return FittedModel(params=params, classes=classes,
                       class_names=data.class_names, dim=data.dim)


@dataclass
class PosteriorRow:
    """Normalized class/block probabilities for one query point."""

    probs: np.ndarray
    raw: np.ndarray
    argmax: int

    @classmethod
    def from_raw(cls, raw: np.ndarray) -> "PosteriorRow":
        total = raw.sum()
        if not total > 0:
            raise ValueError("degenerate kernel: every class weight is zero")
        probs = raw / total
        return cls(probs=probs, raw=raw, argmax=int(np.argmax(probs)))


@dataclass
class PosteriorTable:
    """Stacked posterior rows for a batch of query points."""

    probs: np.ndarray
    raw: np.ndarray
    argmax: np.ndarray
    class_names: tuple[str, ...] = ()

    @classmethod
    def from_rows(cls, rows: Sequence[PosteriorRow],
                  class_names: tuple[str, ...] = ()) -> "PosteriorTable":
        return cls(probs=np.array([r.probs for r in rows]),
                   raw=np.array([r.raw for r in rows]),
                   argmax=np.array([r.argmax for r in rows], dtype=int),
                   class_names=class_names)


def _class_weight(state: _ClassState, model: FittedModel, t) -> float:
    params = model.params
    if state.n == 0:
        return state.alpha * kernel_self(params.kernel, t)
    if params.order == EXACT_ORDER:
        return ratio_exact(t, state.points, params.kernel, state.alpha)
    return ratio_approx_state(state, params.kernel, t, params.order)


def ratio_approx_state(state: _ClassState, kernel: Kernel, t, order: int) -> float:
    kt = kernel_column(kernel, t, state.points)
    ktt = kernel_self(kernel, t)
    return ratio_from_kt(state.table, kt, ktt, order)


def predict_finite(model: FittedModel, t) -> PosteriorRow:
    """Posterior over classes for one query point."""
    raw = np.array([_class_weight(s, model, t) for s in model.classes])
    return PosteriorRow.from_raw(raw)


def predict(model: FittedModel, queries) -> PosteriorTable:
    """Posterior table for a batch of query points."""
    qs = np.asarray(queries, dtype=float)
    if qs.ndim == 1:
        qs = qs.reshape(-1, 1)
    rows = [predict_finite(model, q) for q in qs]
    return PosteriorTable.from_rows(rows, model.class_names)


def predict_infinite(points, partition: Partition, t,
                     params: ModelParams) -> PosteriorRow:
    """Posterior over existing blocks plus a new block for one query.

    Entry j < #B is block j of the partition; the last entry is the new
    block, with weight lambda K(t, t).
    """
    if params.lam is None:
        raise ValueError("infinite-class prediction needs lambda")
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if partition.n != pts.shape[0]:
        raise ValueError("partition must cover exactly the given points")
    kernel = params.kernel
    ktt = kernel_self(kernel, t)
    raw = np.empty(partition.block_count + 1)
    for j, block in enumerate(partition.blocks):
        sub = pts[list(block)]
        if params.order == EXACT_ORDER:
            g = gram(kernel, sub)
            denom = cyp_exact(g.entries)
            if denom == 0.0:
                raise ZeroDivisionError(
                    f"block {j} ({sorted(block)}) has zero cyclic product sum")
            aug = np.empty((len(block) + 1, len(block) + 1))
            aug[:-1, :-1] = g.entries
            col = kernel_column(kernel, t, sub)
            aug[:-1, -1] = col
            aug[-1, :-1] = col
            aug[-1, -1] = ktt
            raw[j] = cyp_exact(aug) / denom
        else:
            g = gram(kernel, sub)
            kt = kernel_column(kernel, t, sub)
            raw[j] = cyclic_ratio_from_kt(g, kt, ktt, int(params.order))
    raw[-1] = params.lam * ktt
    return PosteriorRow.from_raw(raw)


def sequential_partition(points, params: ModelParams, rule: str = "argmax",
                         seed: int | None = None) -> Partition:
    """Grow a partition one point at a time by repeated block prediction.

    ``rule`` is "argmax" (deterministic) or "sample" (seeded, reproducible).
    """
    if rule not in ("argmax", "sample"):
        raise ValueError(f"rule must be 'argmax' or 'sample', got {rule!r}")
    rng = np.random.default_rng(seed) if rule == "sample" else None
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    assignments: list[int] = []
    blocks: list[list[int]] = []
    for i in range(pts.shape[0]):
        if not blocks:
            blocks.append([i])
            assignments.append(0)
            continue
        part = Partition.from_blocks(blocks)
        row = predict_infinite(pts[:i], part, pts[i], params)
        if rule == "argmax":
            choice = row.argmax
        else:
            choice = int(rng.choice(len(row.probs), p=row.probs))
        if choice == len(blocks):
            blocks.append([i])
        else:
            blocks[choice].append(i)
        assignments.append(choice)
    return Partition.from_blocks(blocks) if blocks else Partition(())


def knn_predict(train_points, train_labels, queries, k: int = 5) -> np.ndarray:
    """Plain k-nearest-neighbour baseline, majority vote.

    Distance ties resolve by training index (stable sort) and vote ties
    by lowest class code, so results are deterministic.
    """
    X = np.asarray(train_points, dtype=float)
    y = np.asarray(train_labels, dtype=int)
    Q = np.asarray(queries, dtype=float)
    if Q.ndim == 1:
        Q = Q.reshape(-1, 1)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    out = np.empty(Q.shape[0], dtype=int)
    n_classes = int(y.max()) + 1 if y.size else 0
    for qi, q in enumerate(Q):
        dist = ((X - q) ** 2).sum(axis=1)
        nearest = np.argsort(dist, kind="stable")[:k]
        counts = np.bincount(y[nearest], minlength=n_classes)
        out[qi] = int(np.argmax(counts))
    return out
