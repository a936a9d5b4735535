import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import central_diff, grads_close, softmax_loop
from scorer_calib.head import (
    ALPHA_ONE, ContentHead, ScorerSpecificHead, UniversalHead, backward, content_alpha,
    content_bias, forward_content, forward_scorer, forward_universal, head_from_dict,
    head_to_dict, init_head, load_checkpoint, save_checkpoint, scorer_bias, softmax, softplus,
    softplus_inv,
)


def random_head(kind, rng, C=5, D=3, J=2, D_e=2, scale=0.7, affine=True):
    head = init_head(kind, C, D, J, rng, D_e=D_e, affine=affine)
    for k in head.params:
        head.params[k] = rng.normal(0.0, scale, head.params[k].shape)
    return head


# ---------------------------------------------------------------------------
# Universal head

def test_universal_uniform():
    h = UniversalHead({"W": np.zeros((5, 3)), "b": np.zeros(5)})
    assert np.allclose(forward_universal(h, [1.0, -2.0, 3.0]), 0.2, atol=0, rtol=1e-15)


def test_universal_bias_argmax():
    h = UniversalHead({"W": np.zeros((5, 3)), "b": np.array([1.0, 0, 0, 0, 0])})
    assert forward_universal(h, [0.3, 0.1, 0.2]).argmax() == 0


def test_universal_matches_loop_oracle(rng):
    W, b = rng.normal(size=(4, 3)), rng.normal(size=4)
    h = UniversalHead({"W": W, "b": b})
    for _ in range(10):
        r = rng.normal(size=3)
        z = [sum(W[c, d] * r[d] for d in range(3)) + b[c] for c in range(4)]
        assert np.allclose(forward_universal(h, r), softmax_loop(z), rtol=0, atol=1e-12)


def test_dimension_mismatch():
    h = UniversalHead({"W": np.zeros((5, 3)), "b": np.zeros(5)})
    with pytest.raises(ValueError, match="dimension mismatch"):
        h.forward(np.zeros(4))


def test_non_finite_params_rejected():
    with pytest.raises(ValueError):
        UniversalHead({"W": np.full((2, 2), np.nan), "b": np.zeros(2)})


# ---------------------------------------------------------------------------
# Scorer-specific head

def test_scorer_bias_zero_when_S_zero(rng):
    h = random_head("scorer", rng, J=3)
    h.params["S"][:] = 0
    for j in range(3):
        assert np.all(scorer_bias(h, j) == 0)


def test_scorer_bias_basis(rng):
    h = random_head("scorer", rng, C=5, D_e=4, J=4)
    S = np.zeros((5, 4))
    S[:4, :4] = np.eye(4)
    h.params["S"] = S
    h.params["E"] = np.eye(4)
    for k in range(4):
        assert np.array_equal(scorer_bias(h, k), S[:, k])


def test_scorer_bias_dot_oracle(rng):
    h = random_head("scorer", rng, C=5, D_e=4, J=3)
    S, E = h.params["S"], h.params["E"]
    for j in range(3):
        oracle = [sum(S[c, e] * E[j, e] for e in range(4)) for c in range(5)]
        assert np.allclose(scorer_bias(h, j), oracle, rtol=0, atol=1e-12)
    assert np.allclose(h.biases(), E @ S.T)


def test_scorer_bias_index_error(rng):
    h = random_head("scorer", rng, J=2)
    with pytest.raises(IndexError):
        scorer_bias(h, 2)
    with pytest.raises(IndexError):
        h.forward(np.zeros(3), 5)


def test_scorer_reduces_to_universal(rng):
    C, D, J = 5, 3, 3
    W, b = rng.normal(size=(C, D)), rng.normal(size=C)
    uni = UniversalHead({"W": W, "b": b})
    # every scorer embedding is the same unit vector picking column 0 of S = b
    E = np.zeros((J, 2))
    E[:, 0] = 1.0
    S = np.zeros((C, 2))
    S[:, 0] = b
    sc = ScorerSpecificHead({"W": W, "E": E, "S": S, "theta_alpha": np.full(J, ALPHA_ONE)})
    R = rng.normal(size=(20, D))
    for j in range(J):
        assert np.allclose(sc.forward(R, j), uni.forward(R), rtol=0, atol=1e-12)


def test_scorer_temperature_limit(rng):
    h = random_head("scorer", rng)
    r = rng.normal(size=3)
    prev = 0.0
    for theta in (0.0, 1.0, 3.0, 10.0, 30.0, 100.0):
        h.params["theta_alpha"][0] = theta
        pmax = forward_scorer(h, r, 0).max()
        assert pmax >= prev
        prev = pmax
    assert prev > 1 - 1e-9


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 5, elements=st.floats(-50, 50)), st.floats(1e-3, 1e3))
def test_argmax_invariant_to_temperature(z, alpha):
    if len(np.unique(z)) < len(z):
        return
    assert softmax(alpha * z).argmax() == z.argmax()


# ---------------------------------------------------------------------------
# Content head

def test_content_bias_zero(rng):
    h = random_head("content", rng)
    h.params["A_b"][:] = 0
    assert np.all(content_bias(h, rng.normal(size=3), 1) == 0)


def test_content_bias_rank_one(rng):
    C, D, D_e = 5, 3, 2
    h = random_head("content", rng, C=C, D=D, D_e=D_e, affine=False)
    u = np.eye(D)
    v = np.array([1.0, 0.0])
    A = np.zeros((C, D, D_e))
    for c in range(C):
        A[c] = np.outer(u[c % D], v)
    h.params["A_b"] = A
    h.params["E"][0] = v
    bias = content_bias(h, u[1], 0)
    # categories whose form uses u_1 give 1, the others 0
    assert bias.tolist() == [1.0 if c % D == 1 else 0.0 for c in range(C)]


@pytest.mark.parametrize("affine", [True, False])
def test_content_bias_triple_loop(rng, affine):
    C, D, D_e = 5, 3, 2
    h = random_head("content", rng, C=C, D=D, D_e=D_e, affine=affine)
    r = rng.normal(size=D)
    rt = list(r) + ([1.0] if affine else [])
    e = h.params["E"][1]
    A = h.params["A_b"]
    oracle = [sum(rt[d] * A[c, d, k] * e[k] for d in range(len(rt)) for k in range(D_e)) for c in range(C)]
    assert np.allclose(content_bias(h, r, 1), oracle, rtol=0, atol=1e-12)


def test_content_alpha_values(rng):
    h = random_head("content", rng, affine=False)
    h.params["A_alpha"][:] = 0
    assert content_alpha(h, rng.normal(size=3), 0) == pytest.approx(math.log(2), abs=1e-15)
    # pre-activation r^T A e = 50 and -50 with r = e_0, e = e_0
    h.params["E"][0] = [1.0, 0.0]
    r = np.array([1.0, 0.0, 0.0])
    h.params["A_alpha"][0, 0] = 50.0
    assert abs(content_alpha(h, r, 0) - 50.0) / 50.0 < 1e-12
    h.params["A_alpha"][0, 0] = -50.0
    a = content_alpha(h, r, 0)
    assert a > 0 and a == pytest.approx(math.exp(-50), rel=1e-12)


def test_content_reduces_to_universal(rng):
    C, D, D_e = 5, 3, 2
    W = rng.normal(size=(C, D))
    h = ContentHead({
        "W": W, "E": np.array([[1.0, 0.0], [1.0, 0.0]]),
        "A_b": np.zeros((C, D + 1, D_e)), "A_alpha": np.zeros((D + 1, D_e)),
    })
    # the affine row gives a content-independent pre-activation of softplus^-1(1)
    h.params["A_alpha"][D, 0] = ALPHA_ONE
    uni = UniversalHead({"W": W, "b": np.zeros(C)})
    R = rng.normal(size=(15, D))
    assert np.allclose(h.alpha(R, 0), 1.0, rtol=0, atol=1e-15)
    assert np.allclose(h.forward(R, 1), uni.forward(R), rtol=0, atol=1e-12)


def test_content_reduction_without_affine(rng):
    # alpha = 1 through scaled r and e: r^T A e = softplus^-1(1)
    C, D = 5, 3
    W = rng.normal(size=(C, D))
    A_alpha = np.zeros((D, 2))
    A_alpha[0, 0] = 1.0
    h = ContentHead({"W": W, "E": np.array([[ALPHA_ONE, 0.0]]), "A_b": np.zeros((C, D, 2)),
                     "A_alpha": A_alpha}, affine=False)
    r = np.array([1.0, 0.3, -0.2])
    uni = UniversalHead({"W": W, "b": np.zeros(C)})
    assert np.allclose(forward_content(h, r, 0), forward_universal(uni, r), rtol=0, atol=1e-12)


def test_content_composition_oracle(rng):
    h = random_head("content", rng, C=5, D=3, D_e=2)
    r = rng.normal(size=3)
    bias = content_bias(h, r, 0)
    alpha = content_alpha(h, r, 0)
    z = [alpha * (sum(h.W[c, d] * r[d] for d in range(3)) + bias[c]) for c in range(5)]
    assert np.allclose(forward_content(h, r, 0), softmax_loop(z), rtol=0, atol=1e-12)


# ---------------------------------------------------------------------------
# Shared properties

@pytest.mark.parametrize("kind", ["universal", "scorer", "content"])
def test_normalization(rng, kind):
    R = rng.normal(size=(50, 3))
    j = rng.integers(0, 2, 50)
    p = random_head(kind, rng, scale=0.7).forward(R, j)
    assert np.all(p > 0)
    assert np.allclose(p.sum(axis=1), 1.0, rtol=0, atol=1e-12)
    # large parameters: probabilities may underflow to 0 but stay finite and normalized
    p = random_head(kind, rng, scale=5.0).forward(R, j)
    assert np.all(np.isfinite(p))
    assert np.allclose(p.sum(axis=1), 1.0, rtol=0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 5, elements=st.floats(-1e4, 1e4)))
def test_softmax_stable(z):
    p = softmax(z)
    assert np.all(np.isfinite(p))
    assert abs(p.sum() - 1) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 30))
def test_softplus_inverse(y):
    assert softplus(softplus_inv(y)) == pytest.approx(y, rel=1e-9)


@pytest.mark.parametrize("kind", ["universal", "scorer", "content"])
def test_zero_grad_logits(rng, kind):
    h = random_head(kind, rng)
    g = backward(h, rng.normal(size=3), 1, np.zeros(5))
    assert set(g) == set(h.params)
    assert all(np.all(v == 0) and v.shape == h.params[k].shape for k, v in g.items())


def test_universal_grad_identity(rng):
    h = random_head("universal", rng)
    r, g = rng.normal(size=3), rng.normal(size=5)
    out = backward(h, r, 0, g)
    assert np.allclose(out["W"], np.outer(g, r))
    assert np.allclose(out["b"], g)


@pytest.mark.parametrize("kind", ["universal", "scorer", "content"])
@pytest.mark.parametrize("seed", range(3))
def test_backward_finite_differences(kind, seed):
    # linear functional of the logits: L = sum(G * logits(R, j))
    rng = np.random.default_rng(seed)
    h = random_head(kind, rng, J=3)
    R = rng.normal(size=(6, 3))
    j = np.array([0, 1, 2, 0, 1, 1])
    G = rng.normal(size=(6, 5))
    analytic = h.backward(R, j, G)
    numeric = central_diff(lambda: float((G * h.logits(R, j)).sum()), h.params)
    for k in h.params:
        assert grads_close(analytic[k], numeric[k]), k


def test_untouched_scorers_have_zero_grad(rng):
    h = random_head("scorer", rng, J=3)
    g = backward(h, rng.normal(size=3), 1, rng.normal(size=5))
    assert np.all(g["E"][[0, 2]] == 0) and np.all(g["theta_alpha"][[0, 2]] == 0)
    assert np.any(g["E"][1] != 0)


# ---------------------------------------------------------------------------
# Initialization and checkpoints

def test_init_statistics():
    rng = np.random.default_rng(0)
    h = init_head("scorer", 5, 200, 300, rng, D_e=100)
    assert abs(h.params["W"].std() - 0.02) < 0.002
    assert np.allclose(h.alphas(), 1.0, rtol=0, atol=1e-15)
    assert h.embed_dim == 100
    u = init_head("universal", 5, 8, 3, rng)
    assert np.all(u.params["b"] == 0)
    c = init_head("content", 5, 8, 3, rng)
    assert c.embed_dim == 8 and c.params["A_b"].shape == (5, 9, 8)


def test_init_unknown_kind(rng):
    with pytest.raises(ValueError):
        init_head("tree", 5, 3, 2, rng)


@pytest.mark.parametrize("kind", ["universal", "scorer", "content"])
def test_checkpoint_roundtrip(tmp_path, rng, kind):
    h = random_head(kind, rng, affine=(kind != "content"))
    path = tmp_path / "c.json"
    save_checkpoint(h, path, scorer_ids=["a", "b"])
    back, meta = load_checkpoint(path)
    assert type(back) is type(h)
    assert meta["scorer_ids"] == ["a", "b"] and meta["kind"] == kind
    for k in h.params:
        assert np.array_equal(back.params[k], h.params[k])
    if kind == "content":
        assert back.affine is False
    assert head_to_dict(head_from_dict(head_to_dict(h))) == head_to_dict(h)
