"""Scoring heads: universal, scorer-specific and content-driven.

All heads work on batches: ``R`` is ``(B, D)`` and ``j`` is ``(B,)`` scorer
indices. ``logits`` returns the final pre-softmax values (temperature already
applied), and ``backward`` takes the loss gradient with respect to those
logits and returns gradients for every parameter, keyed like ``params``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.special import expit

INIT_STD = 0.02
HEAD_KINDS = ("universal", "scorer", "content")


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_inv(y):
    y = np.asarray(y, dtype=np.float64)
    return y + np.log(-np.expm1(-y))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


ALPHA_ONE = float(softplus_inv(1.0))


def _as_batch(R, j):
    R = np.asarray(R, dtype=np.float64)
    j = np.asarray(j, dtype=np.intp)
    if R.ndim == 1:
        R = R[None, :]
    if j.ndim == 0:
        j = np.full(R.shape[0], int(j), dtype=np.intp)
    return R, j


class Head:
    kind: str = ""
    param_names: tuple[str, ...] = ()

    def __init__(self, params: dict[str, np.ndarray]):
        self.params = {k: np.array(params[k], dtype=np.float64) for k in self.param_names}
        for name, arr in self.params.items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"parameter {name} has non-finite entries")

    @property
    def W(self) -> np.ndarray:
        return self.params["W"]

    @property
    def num_categories(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    @property
    def num_scorers(self) -> int:
        return 0

    @property
    def embed_dim(self) -> int:
        return 0

    def _check(self, R, j):
        R, j = _as_batch(R, j)
        if R.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: representation has {R.shape[1]}, head expects {self.dim}")
        if self.num_scorers and len(j) and (j.min() < 0 or j.max() >= self.num_scorers):
            raise IndexError("scorer index out of range")
        return R, j

    def logits(self, R, j) -> np.ndarray:
        raise NotImplementedError

    def backward(self, R, j, grad_logits) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def forward(self, R, j=0) -> np.ndarray:
        return softmax(self.logits(R, j))

    def predict(self, R, j=0) -> np.ndarray:
        return self.logits(R, j).argmax(axis=-1)

    def copy(self) -> "Head":
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        new.params = {k: v.copy() for k, v in self.params.items()}
        return new

    def shape_meta(self) -> dict:
        return {
            "kind": self.kind,
            "C": self.num_categories,
            "D": self.dim,
            "D_e": self.embed_dim,
            "J": self.num_scorers,
        }


class UniversalHead(Head):
    """Linear softmax head shared by every scorer; ``j`` is ignored."""

    kind = "universal"
    param_names = ("W", "b")

    @classmethod
    def init(cls, C: int, D: int, rng: np.random.Generator) -> "UniversalHead":
        return cls({"W": rng.normal(0.0, INIT_STD, (C, D)), "b": np.zeros(C)})

    def logits(self, R, j=0):
        R, _ = self._check(R, j)
        return R @ self.W.T + self.params["b"]

    def backward(self, R, j, grad_logits):
        R, _ = self._check(R, j)
        g = np.atleast_2d(np.asarray(grad_logits, dtype=np.float64))
        return {"W": g.T @ R, "b": g.sum(axis=0)}


class ScorerSpecificHead(Head):
    """Per-scorer bias ``S e_j`` and temperature ``softplus(theta_j)``.

    Logits are ``alpha_j * (W r + S e_j)``.
    """

    kind = "scorer"
    param_names = ("W", "E", "S", "theta_alpha")

    @classmethod
    def init(cls, C, D, J, rng, D_e=None) -> "ScorerSpecificHead":
        D_e = D if D_e is None else D_e
        return cls({
            "W": rng.normal(0.0, INIT_STD, (C, D)),
            "E": rng.normal(0.0, INIT_STD, (J, D_e)),
            "S": rng.normal(0.0, INIT_STD, (C, D_e)),
            "theta_alpha": np.full(J, ALPHA_ONE),
        })

    @property
    def num_scorers(self):
        return self.params["E"].shape[0]

    @property
    def embed_dim(self):
        return self.params["E"].shape[1]

    def biases(self) -> np.ndarray:
        """``(J, C)`` matrix of every scorer's bias vector."""
        return self.params["E"] @ self.params["S"].T

    def alphas(self) -> np.ndarray:
        return softplus(self.params["theta_alpha"])

    def _parts(self, R, j):
        E, S = self.params["E"], self.params["S"]
        inner = R @ self.W.T + E[j] @ S.T
        alpha = softplus(self.params["theta_alpha"][j])
        return inner, alpha

    def logits(self, R, j):
        R, j = self._check(R, j)
        inner, alpha = self._parts(R, j)
        return alpha[:, None] * inner

    def backward(self, R, j, grad_logits):
        R, j = self._check(R, j)
        g = np.atleast_2d(np.asarray(grad_logits, dtype=np.float64))
        inner, alpha = self._parts(R, j)
        E, S = self.params["E"], self.params["S"]
        theta = self.params["theta_alpha"]
        g_inner = alpha[:, None] * g
        g_theta_pts = (g * inner).sum(axis=1) * expit(theta[j])
        g_E = np.zeros_like(E)
        np.add.at(g_E, j, g_inner @ S)
        g_theta = np.zeros_like(theta)
        np.add.at(g_theta, j, g_theta_pts)
        return {"W": g_inner.T @ R, "E": g_E, "S": g_inner.T @ E[j], "theta_alpha": g_theta}


class ContentHead(Head):
    """Bias and temperature given by bilinear forms in the representation and ``e_j``.

    ``bias_c = r~^T A_b[c] e_j`` and ``alpha = softplus(r~^T A_alpha e_j)``, where
    ``r~`` is ``r`` with a constant 1 appended when ``affine`` is set (so a
    scorer can carry a content-independent offset even for centered inputs).
    """

    kind = "content"
    param_names = ("W", "E", "A_b", "A_alpha")

    def __init__(self, params, affine: bool = True):
        super().__init__(params)
        self.affine = affine
        rows = self.dim + (1 if affine else 0)
        if self.params["A_b"].shape[1] != rows or self.params["A_alpha"].shape[0] != rows:
            raise ValueError("bilinear matrices do not match the representation dimension")

    @classmethod
    def init(cls, C, D, J, rng, D_e=None, affine=True) -> "ContentHead":
        D_e = D if D_e is None else D_e
        rows = D + (1 if affine else 0)
        return cls({
            "W": rng.normal(0.0, INIT_STD, (C, D)),
            "E": rng.normal(0.0, INIT_STD, (J, D_e)),
            "A_b": rng.normal(0.0, INIT_STD, (C, rows, D_e)),
            "A_alpha": rng.normal(0.0, INIT_STD, (rows, D_e)),
        }, affine=affine)

    @property
    def num_scorers(self):
        return self.params["E"].shape[0]

    @property
    def embed_dim(self):
        return self.params["E"].shape[1]

    def shape_meta(self):
        meta = super().shape_meta()
        meta["affine"] = self.affine
        return meta

    def _augment(self, R):
        if self.affine:
            return np.concatenate([R, np.ones((R.shape[0], 1))], axis=1)
        return R

    def _parts(self, R, j):
        Rt = self._augment(R)
        Ej = self.params["E"][j]
        RA = np.einsum("bd,cde->bce", Rt, self.params["A_b"])
        bias = np.einsum("bce,be->bc", RA, Ej)
        pre = np.einsum("bd,de,be->b", Rt, self.params["A_alpha"], Ej)
        return Rt, Ej, RA, bias, pre

    def bias(self, R, j) -> np.ndarray:
        R, j = self._check(R, j)
        return self._parts(R, j)[3]

    def alpha(self, R, j) -> np.ndarray:
        R, j = self._check(R, j)
        return softplus(self._parts(R, j)[4])

    def base_logits(self, R) -> np.ndarray:
        """``W r`` alone: the prediction with bias removed and temperature 1."""
        R, _ = self._check(R, 0)
        return R @ self.W.T

    def logits(self, R, j):
        R, j = self._check(R, j)
        _, _, _, bias, pre = self._parts(R, j)
        return softplus(pre)[:, None] * (R @ self.W.T + bias)

    def backward(self, R, j, grad_logits):
        R, j = self._check(R, j)
        g = np.atleast_2d(np.asarray(grad_logits, dtype=np.float64))
        Rt, Ej, RA, bias, pre = self._parts(R, j)
        inner = R @ self.W.T + bias
        alpha = softplus(pre)
        g_inner = alpha[:, None] * g
        g_pre = (g * inner).sum(axis=1) * expit(pre)
        A_alpha = self.params["A_alpha"]
        g_Ej = np.einsum("bc,bce->be", g_inner, RA) + g_pre[:, None] * (Rt @ A_alpha)
        g_E = np.zeros_like(self.params["E"])
        np.add.at(g_E, j, g_Ej)
        return {
            "W": g_inner.T @ R,
            "E": g_E,
            "A_b": np.einsum("bc,bd,be->cde", g_inner, Rt, Ej),
            "A_alpha": np.einsum("b,bd,be->de", g_pre, Rt, Ej),
        }


def init_head(kind: str, C: int, D: int, J: int, rng: np.random.Generator, D_e=None, affine=True) -> Head:
    if kind == "universal":
        return UniversalHead.init(C, D, rng)
    if kind == "scorer":
        return ScorerSpecificHead.init(C, D, J, rng, D_e=D_e)
    if kind == "content":
        return ContentHead.init(C, D, J, rng, D_e=D_e, affine=affine)
    raise ValueError(f"unknown head kind {kind!r}; expected one of {HEAD_KINDS}")


# ---------------------------------------------------------------------------
# Single-point conveniences

def forward_universal(head: UniversalHead, r) -> np.ndarray:
    return head.forward(r)[0]


def scorer_bias(head: ScorerSpecificHead, j: int) -> np.ndarray:
    if not 0 <= j < head.num_scorers:
        raise IndexError("scorer index out of range")
    return head.params["S"] @ head.params["E"][j]


def forward_scorer(head: ScorerSpecificHead, r, j: int) -> np.ndarray:
    return head.forward(r, j)[0]


def content_bias(head: ContentHead, r, j: int) -> np.ndarray:
    return head.bias(r, j)[0]


def content_alpha(head: ContentHead, r, j: int) -> float:
    return float(head.alpha(r, j)[0])


def forward_content(head: ContentHead, r, j: int) -> np.ndarray:
    return head.forward(r, j)[0]


def backward(head: Head, r, j: int, grad_logits) -> dict[str, np.ndarray]:
    return head.backward(r, j, np.atleast_2d(grad_logits))


# ---------------------------------------------------------------------------
# Checkpoints

def head_to_dict(head: Head, **meta) -> dict:
    doc = head.shape_meta()
    doc.update(meta)
    doc["params"] = {
        name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
        for name, arr in head.params.items()
    }
    return doc


def head_from_dict(doc: dict) -> Head:
    params = {
        name: np.array(spec["data"], dtype=np.float64).reshape(spec["shape"])
        for name, spec in doc["params"].items()
    }
    kind = doc["kind"]
    if kind == "universal":
        return UniversalHead(params)
    if kind == "scorer":
        return ScorerSpecificHead(params)
    if kind == "content":
        return ContentHead(params, affine=bool(doc.get("affine", True)))
    raise ValueError(f"unknown head kind {kind!r}")


def save_checkpoint(head: Head, path, **meta) -> None:
    Path(path).write_text(json.dumps(head_to_dict(head, **meta)), encoding="utf-8")


def load_checkpoint(path) -> tuple[Head, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    meta = {k: v for k, v in doc.items() if k != "params"}
    return head_from_dict(doc), meta
