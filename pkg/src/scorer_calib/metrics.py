"""Ordinal evaluation metrics: averaged one-vs-rest AUC, expected-score RMSE, Cohen's kappa."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .core import ScoreScale
from .head import Head, softmax


class KappaWeighting(str, enum.Enum):
    UNWEIGHTED = "unweighted"
    LINEAR = "linear"
    QUADRATIC = "quadratic"


@dataclass(frozen=True)
class EvalBatch:
    probs: np.ndarray
    true_cats: np.ndarray
    scale: ScoreScale

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        cats = np.asarray(self.true_cats, dtype=np.intp)
        if probs.ndim != 2 or len(probs) == 0:
            raise ValueError("need a non-empty (N, C) probability matrix")
        if len(cats) != len(probs):
            raise ValueError("probs and true_cats differ in length")
        if probs.shape[1] != self.scale.num_categories:
            raise ValueError("probability width does not match the score scale")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "true_cats", cats)


def binary_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    """Mann-Whitney AUC with half credit for ties."""
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    ranks = rankdata(scores)
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_averaged(batch: EvalBatch) -> float:
    aucs = []
    for c in range(batch.scale.num_categories):
        positive = batch.true_cats == c
        if positive.all() or not positive.any():
            continue
        aucs.append(binary_auc(batch.probs[:, c], positive))
    if not aucs:
        raise ValueError("degenerate evaluation batch")
    return float(np.mean(aucs))


def expected_scores(probs: np.ndarray, scale: ScoreScale) -> np.ndarray:
    return np.asarray(probs) @ scale.values


def rmse(batch: EvalBatch) -> float:
    y = batch.scale.values[batch.true_cats]
    resid = y - expected_scores(batch.probs, batch.scale)
    return float(np.sqrt(np.mean(resid**2)))


def kappa_weights(C: int, weighting) -> np.ndarray:
    weighting = KappaWeighting(weighting)
    a, b = np.meshgrid(np.arange(C), np.arange(C), indexing="ij")
    if weighting is KappaWeighting.UNWEIGHTED:
        return (a != b).astype(np.float64)
    if weighting is KappaWeighting.LINEAR:
        return np.abs(a - b) / (C - 1)
    return (a - b) ** 2 / (C - 1) ** 2


def confusion_matrix(pred_cats, true_cats, C: int) -> np.ndarray:
    O = np.zeros((C, C))
    np.add.at(O, (np.asarray(true_cats, dtype=np.intp), np.asarray(pred_cats, dtype=np.intp)), 1.0)
    return O


def kappa(pred_cats, true_cats, C: int, weighting=KappaWeighting.QUADRATIC) -> float:
    pred = np.asarray(pred_cats, dtype=np.intp)
    true = np.asarray(true_cats, dtype=np.intp)
    if len(pred) != len(true) or len(pred) == 0:
        raise ValueError("kappa needs equal-length, non-empty inputs")
    O = confusion_matrix(pred, true, C)
    n = O.sum()
    E = np.outer(O.sum(axis=1), O.sum(axis=0)) / n
    w = kappa_weights(C, weighting)
    expected = float((w * E).sum())
    observed = float((w * O).sum())
    if expected == 0.0:
        if observed == 0.0:
            return 1.0
        raise ValueError("undefined kappa")
    return 1.0 - observed / expected


@dataclass(frozen=True)
class EvalResult:
    auc: float
    rmse: float
    kappa_unweighted: float
    kappa_linear: float
    kappa_quadratic: float

    def kappa(self, weighting=KappaWeighting.QUADRATIC) -> float:
        return getattr(self, f"kappa_{KappaWeighting(weighting).value}")

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate_probs(probs, true_cats, scale: ScoreScale) -> EvalResult:
    batch = EvalBatch(probs, true_cats, scale)
    pred = batch.probs.argmax(axis=1)
    C = scale.num_categories
    return EvalResult(
        auc=auc_averaged(batch),
        rmse=rmse(batch),
        kappa_unweighted=kappa(pred, batch.true_cats, C, KappaWeighting.UNWEIGHTED),
        kappa_linear=kappa(pred, batch.true_cats, C, KappaWeighting.LINEAR),
        kappa_quadratic=kappa(pred, batch.true_cats, C, KappaWeighting.QUADRATIC),
    )


def evaluate(head: Head, R, j, true_cats, scale: ScoreScale) -> EvalResult:
    """Forward every point through ``head`` with its scorer and score the result."""
    probs = softmax(head.logits(R, j))
    return evaluate_probs(probs, true_cats, scale)


def evaluate_dataset(head: Head, ds, mask=None) -> EvalResult:
    R, j, y = ds.representations, ds.scorer_indices, ds.categories
    if mask is not None:
        R, j, y = R[mask], j[mask], y[mask]
    return evaluate(head, R, j, y, ds.scale)
