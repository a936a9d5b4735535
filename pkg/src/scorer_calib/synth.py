"""Synthetic scoring data with planted scorer archetypes, and recovery scoring."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import pearsonr, spearmanr
from sklearn.metrics import adjusted_rand_score

from .core import DataPoint, Dataset, ResponseFeatures, ScoreScale, seeded_rng
from .head import ScorerSpecificHead, softmax


@dataclass(frozen=True)
class ArchetypeProfile:
    name: str
    bias: tuple[float, ...]
    temperature: float
    weight: float
    # mean (math_token_pct, image_pct, token_length) of the responses these scorers see
    feature_means: tuple[float, float, float] = (30.0, 1.0, 20.0)

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.weight < 0:
            raise ValueError("mixing weight must be non-negative")


# name, sign pattern, temperature, weight, feature means
_ARCHETYPES = (
    ("negative", (1, -1, -1, -1, 0), 1.013, 0.10, (29.13, 0.101, 23.06)),
    ("positive", (-1, -1, -1, -1, 1), 1.034, 0.15, (32.12, 1.286, 24.40)),
    ("conservative", (0, 1, 1, 1, -1), 0.996, 0.10, (23.51, 1.311, 36.16)),
    ("unbiased", (0, 0, 0, 0, None), 1.033, 0.45, (29.48, 0.304, 21.94)),
    ("polarizing", (1, -1, -1, -1, 1), 1.026, 0.10, (45.18, 5.271, 14.35)),
    ("lenient", (-1, 1, 0, 0, 0), 1.007, 0.10, (33.83, 1.403, 13.34)),
)


# Same nonzero signs with graded magnitudes (a few zeros become small
# tie-breakers), so every category has a definite rank for rank-based recovery.
_GRADED = {
    "negative": (1.0, -0.3, -0.6, -0.9, 0.0),
    "positive": (-0.9, -0.6, -0.3, -0.1, 1.0),
    "conservative": (0.0, 0.3, 0.6, 0.45, -1.0),
    "unbiased": (0.0, 0.0, 0.0, 0.0, None),
    "polarizing": (1.0, -0.5, -1.0, -0.25, 0.75),
    "lenient": (-1.0, 0.6, 0.1, 0.0, -0.1),
}


def default_archetypes(C: int = 5, magnitude: float = 1.0, epsilon: float = 0.1,
                       graded: bool = False) -> list[ArchetypeProfile]:
    """The six scorer archetypes on a 0..4 scale.

    Entries of the sign pattern are scaled by ``magnitude``; the unbiased
    archetype only carries ``epsilon`` on the top category. ``graded`` swaps
    the flat +-1 patterns for graded ones with the same signs.
    """
    if C != 5:
        raise ValueError("the default archetypes are defined for 5 score categories")
    out = []
    for name, signs, temp, weight, feats in _ARCHETYPES:
        pattern = _GRADED[name] if graded else signs
        bias = tuple(epsilon if s is None else float(s) * magnitude for s in pattern)
        out.append(ArchetypeProfile(name, bias, temp, weight, feats))
    return out


def null_archetypes(C: int = 5) -> list[ArchetypeProfile]:
    """A single archetype with zero bias and temperature 1."""
    return [ArchetypeProfile("null", (0.0,) * C, 1.0, 1.0)]


@dataclass(frozen=True)
class SynthConfig:
    n_scorers: int = 60
    responses_per_scorer: int = 240
    n_pairs: int = 500
    shared_pairs: float = 0.0
    D: int = 16
    D_e: int = 8
    C: int = 5
    quality_logit_scale: float = 0.5
    bias_jitter: float = 0.0
    feature_noise: tuple[float, float, float] = (8.0, 1.0, 5.0)
    seed: int = 7
    archetypes: tuple[ArchetypeProfile, ...] = field(default_factory=lambda: tuple(default_archetypes()))

    def __post_init__(self):
        if min(self.n_scorers, self.responses_per_scorer, self.n_pairs, self.D, self.D_e) < 1:
            raise ValueError("counts and dimensions must be positive")
        if self.C < 2:
            raise ValueError("need at least two categories")
        if not 0.0 <= self.shared_pairs <= 1.0:
            raise ValueError("shared_pairs is a fraction in [0, 1]")
        if round(self.shared_pairs * self.responses_per_scorer) > self.n_pairs:
            raise ValueError("shared pool too small for the requested overlap")
        if not self.archetypes:
            raise ValueError("need at least one archetype")
        if abs(sum(a.weight for a in self.archetypes) - 1.0) > 1e-9:
            raise ValueError("archetype mixing weights must sum to 1")
        for a in self.archetypes:
            if len(a.bias) != self.C:
                raise ValueError(f"archetype {a.name!r} bias has the wrong length")

    @property
    def scale(self) -> ScoreScale:
        return ScoreScale(0, self.C - 1)


PRESETS = {
    # the six archetypes at unit magnitude
    "table3": {},
    # strongly planted, graded archetypes with per-scorer jitter, used by the benchmark
    "benchmark": {"archetypes": tuple(default_archetypes(magnitude=5.0, graded=True)), "bias_jitter": 1.0},
    # every scorer unbiased with temperature 1
    "null": {"archetypes": tuple(null_archetypes())},
}


def preset(name: str, **overrides) -> SynthConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return SynthConfig(**{**PRESETS[name], **overrides})


@dataclass
class GroundTruth:
    archetype_names: list[str]
    labels: np.ndarray
    bias: np.ndarray
    alpha: np.ndarray
    W: np.ndarray
    scorer_ids: list[str]

    def to_dict(self) -> dict:
        return {
            "archetype_names": self.archetype_names,
            "scorer_ids": self.scorer_ids,
            "labels": self.labels.tolist(),
            "bias": self.bias.tolist(),
            "alpha": self.alpha.tolist(),
            "W": self.W.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GroundTruth":
        return cls(
            archetype_names=list(doc["archetype_names"]),
            labels=np.array(doc["labels"], dtype=np.intp),
            bias=np.array(doc["bias"], dtype=np.float64),
            alpha=np.array(doc["alpha"], dtype=np.float64),
            W=np.array(doc["W"], dtype=np.float64),
            scorer_ids=list(doc["scorer_ids"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")


def _assign_archetypes(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    # Largest-remainder quotas keep the realized mix close to the weights,
    # then the order is shuffled.
    w = np.array([a.weight for a in cfg.archetypes])
    raw = w * cfg.n_scorers
    counts = np.floor(raw).astype(int)
    short = cfg.n_scorers - counts.sum()
    counts[np.argsort(-(raw - counts), kind="stable")[:short]] += 1
    labels = np.repeat(np.arange(len(w)), counts)
    return rng.permutation(labels)


def generate(cfg: SynthConfig) -> tuple[Dataset, GroundTruth]:
    """Sample a dataset from the scorer model with planted biases and temperatures."""
    rng = seeded_rng(cfg.seed, "synth")
    J, n_resp, C = cfg.n_scorers, cfg.responses_per_scorer, cfg.C
    W = rng.normal(0.0, cfg.quality_logit_scale, (C, cfg.D))
    labels = _assign_archetypes(cfg, rng)
    arche_bias = np.array([a.bias for a in cfg.archetypes], dtype=np.float64)
    bias = arche_bias[labels] + cfg.bias_jitter * rng.normal(size=(J, C))
    alpha = np.array([cfg.archetypes[k].temperature for k in labels])

    shared_R = rng.normal(size=(cfg.n_pairs, cfg.D))
    n_shared = int(round(cfg.shared_pairs * n_resp))
    scale = cfg.scale
    noise = np.asarray(cfg.feature_noise, dtype=np.float64)
    points = []
    scorer_ids = [f"s{j:03d}" for j in range(J)]
    fresh = 0
    for j in range(J):
        shared_idx = rng.choice(cfg.n_pairs, size=n_shared, replace=False)
        own = rng.normal(size=(n_resp - n_shared, cfg.D))
        R = np.concatenate([shared_R[shared_idx], own])
        pair_ids = [f"q{i:05d}" for i in shared_idx]
        pair_ids += [f"p{fresh + i:06d}" for i in range(len(own))]
        fresh += len(own)
        probs = softmax(alpha[j] * (R @ W.T + bias[j]))
        u = rng.random(len(R))[:, None]
        cats = (probs.cumsum(axis=1) < u).sum(axis=1).clip(0, C - 1)
        arche = cfg.archetypes[labels[j]]
        feats = np.asarray(arche.feature_means) + noise * rng.normal(size=(len(R), 3))
        feats[:, :2] = feats[:, :2].clip(0.0, 100.0)
        feats[:, 2] = feats[:, 2].clip(0.0, None)
        for i in range(len(R)):
            points.append(DataPoint(
                pair_id=pair_ids[i],
                representation=tuple(float(v) for v in R[i]),
                scorer_id=scorer_ids[j],
                score=scale.to_score(int(cats[i])),
                features=ResponseFeatures(*(float(v) for v in feats[i])),
            ))
    ds = Dataset(scale=scale, points=tuple(points), scorer_ids=tuple(scorer_ids))
    truth = GroundTruth(
        archetype_names=[a.name for a in cfg.archetypes],
        labels=labels,
        bias=bias,
        alpha=alpha,
        W=W,
        scorer_ids=scorer_ids,
    )
    return ds, truth


@dataclass
class RecoveryReport:
    spearman: np.ndarray
    ari: float
    alpha_pearson: float

    def fraction_above(self, threshold: float) -> float:
        return float(np.mean(self.spearman >= threshold))

    def to_dict(self) -> dict:
        return {
            "spearman": self.spearman.tolist(),
            "ari": self.ari,
            "alpha_pearson": self.alpha_pearson,
        }


def _safe_corr(fn, a, b) -> float:
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return 0.0
    return float(fn(a, b)[0])


def recovery_report(truth: GroundTruth, head: ScorerSpecificHead, gmm) -> RecoveryReport:
    """How well a trained head and its embedding clustering recover the planted scorers."""
    if head.num_scorers != len(truth.labels):
        raise ValueError("head and ground truth cover different scorer sets")
    rec = head.biases()
    rec = rec - rec.mean(axis=1, keepdims=True)
    # gmm.predict applies any projection the model was fitted in
    rho = np.array([_safe_corr(spearmanr, rec[j], truth.bias[j]) for j in range(len(rec))])
    ari = float(adjusted_rand_score(truth.labels, gmm.predict(head.params["E"])))
    alpha_r = _safe_corr(pearsonr, head.alphas(), truth.alpha)
    return RecoveryReport(rho, ari, alpha_r)


def config_to_dict(cfg: SynthConfig) -> dict:
    return asdict(cfg)


def with_overrides(cfg: SynthConfig, **changes) -> SynthConfig:
    return replace(cfg, **{k: v for k, v in changes.items() if v is not None})
