"""Domain data model: score scales, data points, datasets, folds and scorer stats."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


@dataclass(frozen=True)
class ScoreScale:
    min_score: int = 0
    max_score: int = 4

    def __post_init__(self):
        if self.max_score - self.min_score + 1 < 2:
            raise ValueError("a score scale needs at least two categories")

    @property
    def num_categories(self) -> int:
        return self.max_score - self.min_score + 1

    @property
    def values(self) -> np.ndarray:
        """Score value of every category index, as float64."""
        return np.arange(self.min_score, self.max_score + 1, dtype=np.float64)

    def contains(self, score: int) -> bool:
        return self.min_score <= score <= self.max_score

    def to_category(self, score: int) -> int:
        if not self.contains(score):
            raise DataError(f"score out of range: {score} not in [{self.min_score}, {self.max_score}]")
        return int(score) - self.min_score

    def to_score(self, category: int) -> int:
        return self.min_score + int(category)


@dataclass(frozen=True)
class ResponseFeatures:
    math_token_pct: float = 0.0
    image_pct: float = 0.0
    token_length: float = 0.0

    def __post_init__(self):
        vals = (self.math_token_pct, self.image_pct, self.token_length)
        if not all(math.isfinite(v) for v in vals):
            raise DataError("response features must be finite")
        for name in ("math_token_pct", "image_pct"):
            if not 0.0 <= getattr(self, name) <= 100.0:
                raise DataError(f"{name} must lie in [0, 100]")
        if self.token_length < 0:
            raise DataError("token_length must be non-negative")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.math_token_pct, self.image_pct, self.token_length)


FEATURE_NAMES = ("math_token_pct", "image_pct", "token_length")

# Each consumer of a user seed draws from its own child stream, so the same
# seed used for data generation and for training does not correlate them.
RNG_STREAMS = {"synth": 0, "folds": 1, "train": 2, "gmm": 3}


def seeded_rng(seed: int, stream: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(RNG_STREAMS[stream],)))


@dataclass(frozen=True)
class DataPoint:
    pair_id: str
    representation: tuple[float, ...]
    scorer_id: str
    score: int
    features: ResponseFeatures = field(default_factory=ResponseFeatures)


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of data points with a dense scorer index.

    ``scorer_ids[j]`` is the scorer with dense index ``j``. Array views used by
    training are built lazily and cached; the dataset itself is never mutated.
    """

    scale: ScoreScale
    points: tuple[DataPoint, ...]
    scorer_ids: tuple[str, ...]

    def __post_init__(self):
        index = self.scorer_index
        missing = {p.scorer_id for p in self.points} - index.keys()
        if missing:
            raise DataError(f"points reference unknown scorers: {sorted(missing)}")

    @classmethod
    def from_points(cls, points: Iterable[DataPoint], scale: ScoreScale) -> "Dataset":
        points = tuple(points)
        order = list(dict.fromkeys(p.scorer_id for p in points))
        return cls(scale=scale, points=points, scorer_ids=tuple(order))

    @cached_property
    def scorer_index(self) -> dict[str, int]:
        return {s: j for j, s in enumerate(self.scorer_ids)}

    @property
    def num_scorers(self) -> int:
        return len(self.scorer_ids)

    @property
    def dim(self) -> int:
        return len(self.points[0].representation) if self.points else 0

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def representations(self) -> np.ndarray:
        arr = np.array([p.representation for p in self.points], dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def scorer_indices(self) -> np.ndarray:
        arr = np.array([self.scorer_index[p.scorer_id] for p in self.points], dtype=np.intp)
        arr.setflags(write=False)
        return arr

    @cached_property
    def categories(self) -> np.ndarray:
        arr = np.array([self.scale.to_category(p.score) for p in self.points], dtype=np.intp)
        arr.setflags(write=False)
        return arr

    @cached_property
    def feature_matrix(self) -> np.ndarray:
        arr = np.array([p.features.as_tuple() for p in self.points], dtype=np.float64).reshape(-1, 3)
        arr.setflags(write=False)
        return arr

    def scorer_counts(self) -> np.ndarray:
        return np.bincount(self.scorer_indices, minlength=self.num_scorers)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: np.ndarray
    seed: int

    def train_mask(self, test_fold: int, val_fold: int) -> np.ndarray:
        return (self.assignment != test_fold) & (self.assignment != val_fold)

    def fold_mask(self, fold: int) -> np.ndarray:
        return self.assignment == fold


@dataclass(frozen=True)
class ScorerStats:
    j: int
    n: int
    mean_score: float
    std_score: float
    category_freq: np.ndarray
    normalized_dist: np.ndarray
    feature_means: ResponseFeatures


# ---------------------------------------------------------------------------
# JSONL ingestion

def _parse_record(obj: Mapping, lineno: int, scale: ScoreScale) -> DataPoint:
    try:
        pair_id = str(obj["pair_id"])
        scorer_id = str(obj["scorer_id"])
        score = obj["score"]
        rep = obj["representation"]
    except (KeyError, TypeError) as exc:
        raise DataError(f"line {lineno}: missing field {exc}") from None
    if isinstance(score, bool) or not isinstance(score, int):
        raise DataError(f"line {lineno}: score must be an integer")
    if not scale.contains(score):
        raise DataError(f"line {lineno}: score out of range ({score})")
    if not isinstance(rep, list) or not rep:
        raise DataError(f"line {lineno}: representation must be a non-empty list")
    try:
        vec = tuple(float(v) for v in rep)
    except (TypeError, ValueError):
        raise DataError(f"line {lineno}: representation must hold numbers") from None
    if not all(math.isfinite(v) for v in vec):
        raise DataError(f"line {lineno}: representation must be finite")
    feats = obj.get("features") or {}
    try:
        features = ResponseFeatures(
            float(feats.get("math_token_pct", 0.0)),
            float(feats.get("image_pct", 0.0)),
            float(feats.get("token_length", 0.0)),
        )
    except DataError as exc:
        raise DataError(f"line {lineno}: {exc}") from None
    return DataPoint(pair_id, vec, scorer_id, score, features)


def parse_jsonl(lines: Iterable[str], scale: ScoreScale = ScoreScale()) -> Dataset:
    points: list[DataPoint] = []
    seen: set[tuple[str, str]] = set()
    dim = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"line {lineno}: malformed JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise DataError(f"line {lineno}: expected a JSON object")
        point = _parse_record(obj, lineno, scale)
        if dim is None:
            dim = len(point.representation)
        elif len(point.representation) != dim:
            raise DataError(
                f"line {lineno}: inconsistent dimension {len(point.representation)} (expected {dim})"
            )
        key = (point.pair_id, point.scorer_id)
        if key in seen:
            raise DataError(f"line {lineno}: duplicate pair_id+scorer_id {key}")
        seen.add(key)
        points.append(point)
    return Dataset.from_points(points, scale)


def load_dataset(path: str | Path, scale: ScoreScale = ScoreScale()) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return parse_jsonl(fh, scale)


def point_to_record(p: DataPoint) -> dict:
    return {
        "pair_id": p.pair_id,
        "scorer_id": p.scorer_id,
        "score": p.score,
        "representation": list(p.representation),
        "features": {
            "math_token_pct": p.features.math_token_pct,
            "image_pct": p.features.image_pct,
            "token_length": p.features.token_length,
        },
    }


def dumps_dataset(ds: Dataset) -> str:
    return "".join(json.dumps(point_to_record(p)) + "\n" for p in ds.points)


def save_dataset(ds: Dataset, path: str | Path) -> None:
    Path(path).write_text(dumps_dataset(ds), encoding="utf-8")


# ---------------------------------------------------------------------------
# Filtering, folds, summaries

def filter_sparse_scorers(ds: Dataset, min_count: int) -> Dataset:
    """Drop every scorer with fewer than ``min_count`` points (inclusive threshold)."""
    if min_count < 1:
        raise ValueError("min_count must be positive")
    counts = Counter(p.scorer_id for p in ds.points)
    kept = [p for p in ds.points if counts[p.scorer_id] >= min_count]
    if not kept:
        raise DataError("no scorers survive filter")
    return Dataset.from_points(kept, ds.scale)


def make_folds(ds: Dataset, k: int, seed: int) -> FoldPlan:
    """Assign points to ``k`` folds, dealing each scorer's shuffled points round-robin.

    The dealing position carries over from one scorer to the next so that the
    overall fold sizes also stay within one of each other.
    """
    if k < 3:
        raise ValueError("need at least 3 folds (train, validation, test)")
    counts = ds.scorer_counts()
    for j, n in enumerate(counts):
        if n < 3:
            raise DataError(
                f"scorer {ds.scorer_ids[j]!r} has {n} points; at least 3 are needed "
                "to keep it in the training folds"
            )
    rng = seeded_rng(seed, "folds")
    assignment = np.empty(len(ds), dtype=np.intp)
    by_scorer = ds.scorer_indices
    offset = 0
    for j in range(ds.num_scorers):
        idx = np.flatnonzero(by_scorer == j)
        idx = rng.permutation(idx)
        assignment[idx] = (offset + np.arange(len(idx))) % k
        offset = (offset + len(idx)) % k
    assignment.setflags(write=False)
    return FoldPlan(k=k, assignment=assignment, seed=seed)


def scorer_summary(ds: Dataset, j: int) -> ScorerStats:
    if not 0 <= j < ds.num_scorers:
        raise IndexError(f"scorer index {j} out of range")
    mask = ds.scorer_indices == j
    cats = ds.categories[mask]
    scores = ds.scale.values[cats]
    C = ds.scale.num_categories
    n = int(mask.sum())
    freq = np.bincount(cats, minlength=C) / n
    feats = ds.feature_matrix[mask].mean(axis=0)
    return ScorerStats(
        j=j,
        n=n,
        mean_score=float(scores.mean()),
        std_score=float(scores.std()),
        category_freq=freq,
        normalized_dist=freq - freq.mean(),
        feature_means=ResponseFeatures(*(float(v) for v in feats)),
    )


def all_scorer_summaries(ds: Dataset) -> list[ScorerStats]:
    return [scorer_summary(ds, j) for j in range(ds.num_scorers)]


def subset(ds: Dataset, indices: Sequence[int] | np.ndarray) -> Dataset:
    """Points at ``indices`` with the parent's scorer index kept intact."""
    pts = tuple(ds.points[i] for i in np.asarray(indices, dtype=np.intp))
    return Dataset(scale=ds.scale, points=pts, scorer_ids=ds.scorer_ids)
