"""Hyperparameter selection by k-fold cross-validation.

Candidates are full model configurations; folds are a deterministic
function of (n, folds, seed).  The winner minimizes the mean objective
across folds, with ties broken by smaller tau, then smaller alpha, then
candidate position.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .classify import LabeledDataset, ModelParams, PosteriorTable, fit, predict
from .kernels import Kernel

__all__ = [
    "CVSpec",
    "CandidateResult",
    "CVReport",
    "fold_assignment",
    "cross_validate",
    "cross_entropy",
    "error_rate",
    "median_pairwise_distance",
    "default_grid",
]

PROB_FLOOR = 1e-12

OBJECTIVES = ("error", "xent")


@dataclass
class CVSpec:
    grid: list[ModelParams]
    folds: int = 10
    objective: str = "error"
    seed: int = 0
    stratified: bool = False

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError(f"need at least 2 folds, got {self.folds}")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if not self.grid:
            raise ValueError("candidate grid is empty")


@dataclass
class CandidateResult:
    params: ModelParams
    fold_scores: list[float]
    mean: float
    valid: bool = True
    message: str = ""


@dataclass
class CVReport:
    spec: CVSpec
    results: list[CandidateResult]
    winner_index: int
    n: int

    @property
    def winner(self) -> ModelParams:
        return self.results[self.winner_index].params

    def to_dict(self) -> dict:
        return {
            "folds": self.spec.folds,
            "objective": self.spec.objective,
            "seed": self.spec.seed,
            "stratified": self.spec.stratified,
            "n": self.n,
            "candidates": [
                {
                    "params": r.params.to_dict(),
                    "fold_scores": r.fold_scores,
                    "mean": r.mean,
                    "valid": r.valid,
                    "message": r.message,
                }
                for r in self.results
            ],
            "winner_index": self.winner_index,
            "winner": self.winner.to_dict(),
        }


def fold_assignment(n: int, folds: int, seed: int,
                    labels: np.ndarray | None = None,
                    stratified: bool = False) -> list[np.ndarray]:
    """Deterministic fold index sets; optionally stratified by class."""
    if n < folds:
        raise ValueError(f"cannot split {n} items into {folds} folds")
    rng = np.random.default_rng(seed)
    if not stratified or labels is None:
        perm = rng.permutation(n)
        return [np.sort(part) for part in np.array_split(perm, folds)]
    buckets: list[list[int]] = [[] for _ in range(folds)]
    slot = 0
    for r in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == r))
        for i in idx:
            buckets[slot % folds].append(int(i))
            slot += 1
    return [np.sort(np.array(b, dtype=int)) for b in buckets]


def error_rate(posteriors: PosteriorTable | np.ndarray, truth) -> float:
    """Fraction of argmax labels that miss the truth."""
    y = np.asarray(truth, dtype=int)
    if isinstance(posteriors, PosteriorTable):
        pred = posteriors.argmax
    else:
        pred = np.asarray(posteriors).argmax(axis=1)
    return float(np.mean(pred != y))


def cross_entropy(posteriors: PosteriorTable | np.ndarray, truth) -> float:
    """Mean -log p(true class), probabilities floored at 1e-12."""
    y = np.asarray(truth, dtype=int)
    probs = posteriors.probs if isinstance(posteriors, PosteriorTable) else np.asarray(posteriors)
    p = probs[np.arange(len(y)), y]
    return float(np.mean(-np.log(np.maximum(p, PROB_FLOOR))))


def _objective_fn(name: str):
    return error_rate if name == "error" else cross_entropy


def _tie_key(params: ModelParams) -> tuple[float, float]:
    tau = params.kernel.tau if params.kernel.tau is not None else float("inf")
    alphas = params.alphas
    alpha = float(alphas) if np.isscalar(alphas) else float(min(alphas))
    return (tau, alpha)


def cross_validate(data: LabeledDataset, spec: CVSpec) -> CVReport:
    """Mean objective per candidate across folds; argmin wins.

    A fold missing a class entirely is fine (the empty-class rule covers
    it); a candidate whose evaluation raises is marked invalid with an
    infinite score instead of aborting the sweep.
    """
    folds = fold_assignment(data.n, spec.folds, spec.seed,
                            labels=data.labels, stratified=spec.stratified)
    objective = _objective_fn(spec.objective)
    all_idx = np.arange(data.n)
    results: list[CandidateResult] = []
    for params in spec.grid:
        scores: list[float] = []
        valid, message = True, ""
        try:
            for heldout in folds:
                train_idx = np.setdiff1d(all_idx, heldout)
                model = fit(data.subset(train_idx), params)
                table = predict(model, data.points[heldout])
                scores.append(objective(table, data.labels[heldout]))
            mean = float(np.mean(scores))
        except Exception as exc:  # candidate-level isolation
            valid, message, mean = False, f"{type(exc).__name__}: {exc}", float("inf")
        results.append(CandidateResult(params, scores, mean, valid, message))
    order = sorted(range(len(results)),
                   key=lambda i: (results[i].mean, *_tie_key(results[i].params), i))
    return CVReport(spec=spec, results=results, winner_index=order[0], n=data.n)


def median_pairwise_distance(points) -> float:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    n = pts.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    iu = np.triu_indices(n, k=1)
    return float(np.median(np.sqrt(d2[iu])))


def default_grid(points, families: Sequence[str] = ("exponential", "gaussian"),
                 tau_scales: Sequence[float] = (0.25, 0.5, 1.0, 2.0, 4.0),
                 alphas: Sequence[float] = (0.25, 0.5, 1.0, 2.0, 4.0),
                 order: int | str = 3) -> list[ModelParams]:
    """Scale-aware default grid: tau multiples of the median pairwise
    distance crossed with a logarithmic alpha grid."""
    med = median_pairwise_distance(points)
    grid = []
    for fam in families:
        for ts in tau_scales:
            kernel = Kernel(fam, tau=ts * med)
            for a in alphas:
                grid.append(ModelParams(kernel=kernel, alphas=a, order=order))
    return grid
