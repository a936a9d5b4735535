"""Training objectives: cross-entropy, ordinal log loss and expected-score MSE.

Each loss takes probabilities ``p`` of shape ``(..., C)`` and returns per-point
values plus the gradient with respect to the logits that produced ``p``
through a softmax. Temperature and bias chains are handled by the head.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DataPoint, ScoreScale
from .head import Head, softmax

EPS = 1e-12


class LossKind(str, enum.Enum):
    CE = "ce"
    OLL = "oll"
    MSE = "mse"


@dataclass(frozen=True)
class LossResult:
    value: np.ndarray | float
    grad_logits: np.ndarray


def _softmax_vjp(p: np.ndarray, g_p: np.ndarray) -> np.ndarray:
    # d/dz_k = p_k * (g_k - sum_c g_c p_c)
    return p * (g_p - (g_p * p).sum(axis=-1, keepdims=True))


def ce_loss(p, y_cat) -> LossResult:
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y_cat, dtype=np.intp)
    p_true = np.take_along_axis(p, y[..., None], axis=-1)[..., 0]
    value = -np.log(np.maximum(p_true, EPS))
    onehot = np.zeros_like(p)
    np.put_along_axis(onehot, y[..., None], 1.0, axis=-1)
    return LossResult(value, p - onehot)


def oll_weights(y_score, scale: ScoreScale) -> np.ndarray:
    """``|y - s_c|`` for every category, in score units."""
    y = np.asarray(y_score, dtype=np.float64)
    return np.abs(y[..., None] - scale.values)


def oll_loss(p, y_score, scale: ScoreScale) -> LossResult:
    p = np.asarray(p, dtype=np.float64)
    w = oll_weights(y_score, scale)
    q = np.maximum(1.0 - p, EPS)
    value = -(w * np.log(q)).sum(axis=-1)
    g_p = np.where(1.0 - p > EPS, w / q, 0.0)
    return LossResult(value, _softmax_vjp(p, g_p))


def mse_loss(p, y_score, scale: ScoreScale) -> LossResult:
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y_score, dtype=np.float64)
    s = scale.values
    expected = p @ s
    resid = y - expected
    g_expected = -2.0 * resid
    grad = g_expected[..., None] * p * (s - expected[..., None])
    return LossResult(resid**2, grad)


def point_loss(kind, p, y_cat, scale: ScoreScale) -> LossResult:
    """Dispatch on ``kind`` with targets given as category indices."""
    kind = LossKind(kind)
    if kind is LossKind.CE:
        return ce_loss(p, y_cat)
    y_score = np.asarray(y_cat) + scale.min_score
    if kind is LossKind.OLL:
        return oll_loss(p, y_score, scale)
    return mse_loss(p, y_score, scale)


def batch_loss_arrays(kind, head: Head, R, j, y_cat, scale: ScoreScale):
    """Mean loss over a batch and the mean parameter gradients."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape[0] == 0:
        raise ValueError("empty batch")
    p = softmax(head.logits(R, j))
    res = point_loss(kind, p, y_cat, scale)
    n = R.shape[0]
    grads = head.backward(R, j, res.grad_logits / n)
    return float(np.mean(res.value)), grads


def batch_loss(kind, head: Head, points: Sequence[DataPoint], scorer_index, scale: ScoreScale):
    """Like :func:`batch_loss_arrays` for a list of points.

    ``scorer_index`` maps scorer ids to dense indices (a dict or any callable).
    """
    if not points:
        raise ValueError("empty batch")
    resolve = scorer_index if callable(scorer_index) else scorer_index.__getitem__
    R = np.array([p.representation for p in points], dtype=np.float64)
    j = np.array([resolve(p.scorer_id) for p in points], dtype=np.intp)
    y = np.array([scale.to_category(p.score) for p in points], dtype=np.intp)
    return batch_loss_arrays(kind, head, R, j, y, scale)
