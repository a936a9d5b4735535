"""Adam, the epoch trainer with validation-based checkpoint selection, and cross-validation."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import Dataset, FoldPlan, make_folds, seeded_rng
from .head import HEAD_KINDS, Head, init_head
from .loss import LossKind, batch_loss_arrays, point_loss
from .metrics import EvalResult, evaluate

log = logging.getLogger(__name__)

THREADS_ENV = "SCORER_CALIB_THREADS"
METRIC_NAMES = ("auc", "rmse", "kappa_unweighted", "kappa_linear", "kappa_quadratic")
# "loss" selects on the validation value of the training objective.
SELECTION_METRICS = METRIC_NAMES + ("loss",)
_MINIMIZE = {"rmse", "loss"}


class Adam:
    """Adam with bias correction over a dict of parameter arrays (updated in place)."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for k, g in grads.items():
            if g.shape != params[k].shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter {k} {params[k].shape}")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(params[k])
                self.v[k] = np.zeros_like(params[k])
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            params[k] -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def adam_step(state: Adam, params, grads):
    state.step(params, grads)
    return params


@dataclass(frozen=True)
class TrainConfig:
    head_kind: str = "universal"
    loss: str = "ce"
    lr: float = 1e-5
    batch_size: int = 16
    epochs: int = 10
    seed: int = 0
    selection_metric: str = "kappa_quadratic"
    embed_dim: int | None = None
    affine: bool = True

    def __post_init__(self):
        if self.head_kind not in HEAD_KINDS:
            raise ValueError(f"head_kind must be one of {HEAD_KINDS}")
        LossKind(self.loss)
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("lr and batch_size must be positive, epochs non-negative")
        if self.selection_metric not in SELECTION_METRICS:
            raise ValueError(f"selection_metric must be one of {SELECTION_METRICS}")
        if self.embed_dim is not None and self.embed_dim < 1:
            raise ValueError("embed_dim must be positive")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    validation: EvalResult
    validation_loss: float

    def metric(self, name: str) -> float:
        return self.validation_loss if name == "loss" else getattr(self.validation, name)


@dataclass
class TrainReport:
    epochs: list[EpochRecord]
    best_epoch: int
    test: EvalResult
    selection_metric: str
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self, include_timing: bool = False) -> dict:
        doc = {
            "selection_metric": self.selection_metric,
            "best_epoch": self.best_epoch,
            "epochs": [
                {
                    "epoch": r.epoch,
                    "train_loss": r.train_loss,
                    "validation_loss": r.validation_loss,
                    "validation": r.validation.as_dict(),
                }
                for r in self.epochs
            ],
            "test": self.test.as_dict(),
        }
        if include_timing:
            doc["wall_time"] = self.wall_time
        return doc


def _better(metric: str, new: float, best: float) -> bool:
    return new < best if metric in _MINIMIZE else new > best


def train(ds: Dataset, folds: FoldPlan, test_fold: int, val_fold: int, cfg: TrainConfig):
    """Train one head on all folds except ``test_fold`` and ``val_fold``.

    Epoch 0 is the initialized head. After each epoch the validation metrics
    are recorded; the checkpoint with the best ``cfg.selection_metric`` is
    kept (ties go to the earlier epoch) and scored once on the test fold.
    """
    if test_fold == val_fold:
        raise ValueError("test_fold and val_fold must differ")
    for f in (test_fold, val_fold):
        if not 0 <= f < folds.k:
            raise ValueError(f"fold {f} out of range for k={folds.k}")
    start = time.perf_counter()
    rng = seeded_rng(cfg.seed, "train")
    R, j, y = ds.representations, ds.scorer_indices, ds.categories
    scale = ds.scale
    head = init_head(
        cfg.head_kind, scale.num_categories, ds.dim, ds.num_scorers, rng,
        D_e=cfg.embed_dim, affine=cfg.affine,
    )
    opt = Adam(lr=cfg.lr)
    train_idx = np.flatnonzero(folds.train_mask(test_fold, val_fold))
    val = folds.fold_mask(val_fold)
    test = folds.fold_mask(test_fold)

    def mean_loss(h: Head, idx) -> float:
        p = h.forward(R[idx], j[idx])
        return float(np.mean(point_loss(cfg.loss, p, y[idx], scale).value))

    def record(epoch: int, h: Head, train_loss: float) -> EpochRecord:
        ev = evaluate(h, R[val], j[val], y[val], scale)
        return EpochRecord(epoch, train_loss, ev, mean_loss(h, val))

    metric = cfg.selection_metric
    records = [record(0, head, mean_loss(head, train_idx))]
    best_head, best_epoch, best_score = head.copy(), 0, records[0].metric(metric)

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(train_idx)
        total = 0.0
        for s in range(0, len(order), cfg.batch_size):
            b = order[s:s + cfg.batch_size]
            value, grads = batch_loss_arrays(cfg.loss, head, R[b], j[b], y[b], scale)
            opt.step(head.params, grads)
            total += value * len(b)
        records.append(record(epoch, head, total / len(order)))
        score = records[-1].metric(metric)
        if _better(metric, score, best_score):
            best_head, best_epoch, best_score = head.copy(), epoch, score
        log.debug("epoch %d loss %.5f val %s %.4f", epoch, records[-1].train_loss, metric, score)

    test_eval = evaluate(best_head, R[test], j[test], y[test], scale)
    report = TrainReport(records, best_epoch, test_eval, metric, time.perf_counter() - start)
    return best_head, report


@dataclass
class CVResult:
    reports: list[TrainReport]
    heads: list[Head]
    summary: dict[str, tuple[float, float]]


def summarize(reports: list[TrainReport]) -> dict[str, tuple[float, float]]:
    """Mean and sample standard deviation of every test metric across folds."""
    out = {}
    for name in METRIC_NAMES:
        vals = np.array([getattr(r.test, name) for r in reports])
        std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        out[name] = (float(vals.mean()), std)
    return out


def _cv_job(args):
    ds, folds, k, cfg = args
    return train(ds, folds, k, (k + 1) % folds.k, cfg)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def cross_validate(ds: Dataset, k: int, cfg: TrainConfig, folds: FoldPlan | None = None,
                   workers: int | None = None) -> CVResult:
    """Rotate (test, validation) = (f, f+1 mod k) over every fold ``f``."""
    if k < 3:
        raise ValueError("cross-validation needs k >= 3")
    folds = make_folds(ds, k, cfg.seed) if folds is None else folds
    workers = thread_count() if workers is None else workers
    jobs = [(ds, folds, f, cfg) for f in range(k)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cv_job, jobs))
    else:
        results = [_cv_job(job) for job in jobs]
    heads = [h for h, _ in results]
    reports = [r for _, r in results]
    return CVResult(reports, heads, summarize(reports))


def config_with(cfg: TrainConfig, **changes) -> TrainConfig:
    return replace(cfg, **changes)


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
