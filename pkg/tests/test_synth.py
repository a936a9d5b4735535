import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scorer_calib.analysis import cluster_embeddings
from scorer_calib.core import dumps_dataset
from scorer_calib.head import ScorerSpecificHead, softmax, softplus_inv
from scorer_calib.synth import (
    PRESETS, ArchetypeProfile, GroundTruth, SynthConfig, config_to_dict, default_archetypes,
    generate, null_archetypes, preset, recovery_report, with_overrides,
)

SMALL = dict(n_scorers=12, responses_per_scorer=15, n_pairs=40, D=4, D_e=3)


# ---------------------------------------------------------------------------
# Archetypes

def test_default_archetypes():
    arch = default_archetypes()
    assert [a.name for a in arch] == ["negative", "positive", "conservative", "unbiased", "polarizing", "lenient"]
    assert sum(a.weight for a in arch) == pytest.approx(1.0)
    assert max(arch, key=lambda a: a.weight).name == "unbiased"
    assert all(len(a.bias) == 5 for a in arch)


def test_polarizing_extremes():
    pol = {a.name: a for a in default_archetypes(magnitude=2.0)}["polarizing"]
    assert pol.bias[0] > 0 and pol.bias[4] > 0
    assert all(b < 0 for b in pol.bias[1:4])
    assert pol.bias[0] == 2.0


def test_graded_keeps_signs():
    flat = default_archetypes()
    graded = default_archetypes(graded=True)
    for f, g in zip(flat, graded):
        nz = np.array(f.bias) != 0
        assert np.array_equal(np.sign(f.bias)[nz], np.sign(g.bias)[nz])


def test_unbiased_epsilon():
    un = {a.name: a for a in default_archetypes(magnitude=3.0, epsilon=0.25)}["unbiased"]
    assert un.bias == (0.0, 0.0, 0.0, 0.0, 0.25)


def test_archetypes_need_five_categories():
    with pytest.raises(ValueError):
        default_archetypes(C=4)


def test_archetype_validation():
    with pytest.raises(ValueError):
        ArchetypeProfile("x", (0.0,) * 5, 0.0, 1.0)
    with pytest.raises(ValueError):
        ArchetypeProfile("x", (0.0,) * 5, 1.0, -0.1)


# ---------------------------------------------------------------------------
# Config

@pytest.mark.parametrize("kw", [
    {"n_scorers": 0}, {"C": 1}, {"shared_pairs": 1.5},
    {"shared_pairs": 1.0, "n_pairs": 10}, {"archetypes": ()},
    {"archetypes": (ArchetypeProfile("a", (0.0,) * 5, 1.0, 0.5),)},
    {"archetypes": (ArchetypeProfile("a", (0.0,) * 4, 1.0, 1.0),)},
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SynthConfig(**kw)


def test_presets():
    assert set(PRESETS) == {"table3", "benchmark", "null"}
    assert preset("null").archetypes == tuple(null_archetypes())
    bench = preset("benchmark", seed=3)
    assert bench.seed == 3 and bench.bias_jitter == 1.0
    assert max(abs(b) for a in bench.archetypes for b in a.bias) == 5.0
    with pytest.raises(ValueError):
        preset("nope")


def test_overrides_skip_none():
    cfg = with_overrides(SynthConfig(), seed=None, n_scorers=9)
    assert cfg.seed == 7 and cfg.n_scorers == 9
    assert config_to_dict(cfg)["n_scorers"] == 9


# ---------------------------------------------------------------------------
# Generation

def test_generate_shapes_and_scale():
    ds, truth = generate(SynthConfig(**SMALL))
    assert len(ds) == 12 * 15 and ds.num_scorers == 12 and ds.dim == 4
    assert set(ds.categories.tolist()) <= set(range(5))
    assert ds.scorer_counts().tolist() == [15] * 12
    assert truth.bias.shape == (12, 5) and truth.W.shape == (5, 4)
    assert list(truth.scorer_ids) == list(ds.scorer_ids)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 7))
def test_scores_within_scale(seed, C):
    cfg = SynthConfig(**{**SMALL, "C": C}, seed=seed, archetypes=tuple(null_archetypes(C)))
    ds, _ = generate(cfg)
    scores = np.array([p.score for p in ds.points])
    assert scores.min() >= 0 and scores.max() <= C - 1
    for p in ds.points:
        f = p.features
        assert 0 <= f.math_token_pct <= 100 and 0 <= f.image_pct <= 100 and f.token_length >= 0


def test_generate_deterministic_bytes():
    a, ta = generate(SynthConfig(**SMALL, seed=11))
    b, tb = generate(SynthConfig(**SMALL, seed=11))
    c, _ = generate(SynthConfig(**SMALL, seed=12))
    assert dumps_dataset(a) == dumps_dataset(b)
    assert json.dumps(ta.to_dict()) == json.dumps(tb.to_dict())
    assert dumps_dataset(a) != dumps_dataset(c)


def test_archetype_quotas():
    _, truth = generate(SynthConfig(n_scorers=20, responses_per_scorer=3, n_pairs=5, D=2, D_e=2))
    counts = np.bincount(truth.labels, minlength=6)
    assert counts.tolist() == [2, 3, 2, 9, 2, 2]


def test_null_sampling_matches_softmax():
    # 50k draws from alpha = 1, zero bias: empirical category frequencies
    # against the mean model probability
    cfg = preset("null", n_scorers=10, responses_per_scorer=5000, n_pairs=10, D=6, quality_logit_scale=0.8)
    ds, truth = generate(cfg)
    expected = softmax(ds.representations @ truth.W.T).mean(axis=0)
    observed = np.bincount(ds.categories, minlength=5) / len(ds)
    assert 0.5 * np.abs(observed - expected).sum() < 0.01


def test_negative_scores_lower_on_shared_pairs():
    cfg = preset("table3", n_scorers=40, responses_per_scorer=200, n_pairs=200, shared_pairs=1.0, D=4, D_e=4)
    ds, truth = generate(cfg)
    names = np.array(truth.archetype_names)[truth.labels]
    mean = {j: np.mean([p.score for p in ds.points if p.scorer_id == sid]) for j, sid in enumerate(ds.scorer_ids)}
    neg = np.mean([mean[j] for j in np.flatnonzero(names == "negative")])
    unb = np.mean([mean[j] for j in np.flatnonzero(names == "unbiased")])
    assert neg < unb
    # every scorer saw the same pairs
    pairs = {sid: {p.pair_id for p in ds.points if p.scorer_id == sid} for sid in ds.scorer_ids}
    assert len({frozenset(v) for v in pairs.values()}) == 1


def test_ground_truth_roundtrip(tmp_path):
    _, truth = generate(SynthConfig(**SMALL))
    truth.save(tmp_path / "t.json")
    back = GroundTruth.from_dict(json.loads((tmp_path / "t.json").read_text()))
    assert np.array_equal(back.labels, truth.labels) and np.array_equal(back.bias, truth.bias)
    assert np.array_equal(back.W, truth.W) and back.scorer_ids == truth.scorer_ids


# ---------------------------------------------------------------------------
# Recovery

def oracle_head(truth):
    return ScorerSpecificHead({
        "W": truth.W, "E": truth.bias.copy(), "S": np.eye(len(truth.W)),
        "theta_alpha": softplus_inv(truth.alpha),
    })


def test_oracle_head_recovers_everything():
    cfg = preset("benchmark", n_scorers=30, responses_per_scorer=5, n_pairs=10, bias_jitter=0.0)
    _, truth = generate(cfg)
    head = oracle_head(truth)
    gmm = cluster_embeddings(head.params["E"], 6, seed=0, dims=4)
    rep = recovery_report(truth, head, gmm)
    assert np.allclose(rep.spearman, 1.0)
    assert rep.ari == 1.0 and rep.fraction_above(0.7) == 1.0
    assert rep.alpha_pearson == pytest.approx(1.0)
    assert set(rep.to_dict()) == {"spearman", "ari", "alpha_pearson"}


def test_random_head_has_no_cluster_signal():
    cfg = preset("benchmark", n_scorers=60, responses_per_scorer=5, n_pairs=10)
    _, truth = generate(cfg)
    aris = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        head = ScorerSpecificHead.init(5, cfg.D, 60, rng, D_e=8)
        gmm = cluster_embeddings(head.params["E"], 6, seed=seed, dims=4)
        aris.append(recovery_report(truth, head, gmm).ari)
    assert np.all(np.abs(aris) < 0.2)


def test_recovery_size_mismatch():
    _, truth = generate(SynthConfig(**SMALL))
    head = ScorerSpecificHead.init(5, 4, 5, np.random.default_rng(0), D_e=3)
    with pytest.raises(ValueError):
        recovery_report(truth, head, None)
