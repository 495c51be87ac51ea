import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rendezvous_rl.policy import (
    AllMaskedError,
    PolicyParams,
    decoder_forward,
    dumps_params,
    encoder_forward,
    grad_log_prob,
    layer_norm,
    loads_params,
    log_prob,
    masked_softmax,
    mha_forward,
    param_shapes,
    sample_action,
)


def rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def inputs(n, seed=0):
    r = rng(seed)
    return r.random((n, 2)), r.random((n, 7))


def test_layer_norm_examples():
    assert layer_norm([1.0, 3.0], 1.0, 0.0, eps=0.0).tolist() == [-1.0, 1.0]
    assert np.all(layer_norm(np.full(8, 4.2), 1.0, 0.0) == 0.0)
    x = rng(1).normal(size=(5, 32)) * 7 + 3
    y = layer_norm(x, np.ones(32), np.zeros(32))
    assert np.all(np.abs(y.mean(-1)) < 1e-9)
    assert np.all(np.abs(y.var(-1) - 1) < 1e-6)
    with pytest.raises(ValueError):
        layer_norm([1.0], 1.0, 0.0)


def test_masked_softmax_examples():
    assert masked_softmax([0.0, 0.0], [True, True]).tolist() == [0.5, 0.5]
    assert masked_softmax([5.0, 1.0], [True, False]).tolist() == [1.0, 0.0]
    with pytest.raises(AllMaskedError):
        masked_softmax([1.0, 2.0], [False, False])


@settings(max_examples=50)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20), st.data())
def test_masked_softmax_properties(logits, data):
    mask = np.array(data.draw(st.lists(st.booleans(), min_size=len(logits), max_size=len(logits))))
    mask[data.draw(st.integers(0, len(logits) - 1))] = True
    p = masked_softmax(np.array(logits), mask)
    assert np.all(p[~mask] == 0.0)
    assert abs(p.sum() - 1.0) < 1e-12


def test_mha_zero_query_key_is_uniform():
    r = rng(2)
    x = r.normal(size=(5, 32))
    Wv = r.normal(size=(4, 32, 8))
    Z = np.zeros((4, 32, 8))
    out = mha_forward(x, x, Z, Z, Wv)
    expect = np.concatenate([(x @ Wv[j]).mean(0) for j in range(4)])
    assert out.shape == (5, 32)
    assert np.allclose(out, np.broadcast_to(expect, (5, 32)), atol=1e-12)


def test_mha_permutation_equivariant():
    r = rng(3)
    x = r.normal(size=(6, 32))
    W = [r.normal(size=(4, 32, 8)) / 5 for _ in range(3)]
    perm = r.permutation(6)
    assert np.max(np.abs(mha_forward(x[perm], x[perm], *W) - mha_forward(x, x, *W)[perm])) < 1e-9


@pytest.mark.parametrize("n", [1, 5, 12])
def test_shapes_and_sums(n):
    P = PolicyParams.init(0)
    X, S = inputs(n)
    h = encoder_forward(P, X)
    assert h.shape == (n, 32)
    mask = np.ones(n, dtype=bool)
    mask[::2] = n == 1
    p = decoder_forward(P, h, S, mask)
    assert p.shape == (n,)
    assert abs(p.sum() - 1) < 1e-12 and np.all(p[~mask] == 0)
    assert np.all(np.isfinite(h)) and np.all(np.isfinite(p))


def test_encoder_deterministic_and_equivariant():
    P = PolicyParams.init(4)
    X, _ = inputs(9, 4)
    assert np.array_equal(encoder_forward(P, X), encoder_forward(P, X))
    perm = rng(5).permutation(9)
    assert np.max(np.abs(encoder_forward(P, X[perm]) - encoder_forward(P, X)[perm])) < 1e-9


def test_decoder_equivariant():
    P = PolicyParams.init(6)
    X, S = inputs(8, 6)
    mask = rng(7).random(8) < 0.6
    mask[0] = True
    h = encoder_forward(P, X)
    perm = rng(8).permutation(8)
    p = decoder_forward(P, h, S, mask)
    q = decoder_forward(P, h[perm], S[perm], mask[perm])
    assert np.max(np.abs(q - p[perm])) < 1e-12


def test_single_valid_node_forced():
    P = PolicyParams.init(1)
    X, S = inputs(5)
    mask = np.zeros(5, dtype=bool)
    mask[3] = True
    assert decoder_forward(P, encoder_forward(P, X), S, mask).tolist() == [0, 0, 0, 1, 0]
    g = grad_log_prob(P, X, S, mask, 3)
    assert all(np.all(v == 0) for v in g.values())


def test_parameter_count():
    P = PolicyParams.init(0)
    assert P.n_params == sum(int(np.prod(s)) for s in param_shapes().values())
    assert P.n_params == PolicyParams.init(99).n_params == 26_624
    assert P["enc_Wq"].shape == (4, 32, 8)
    assert np.all(P["dec_ln2_g"] == 1) and np.all(P["dec_ln2_b"] == 0)
    assert np.abs(P["dec_in_W"]).max() <= 1 / np.sqrt(7)


def test_sample_action():
    assert sample_action(np.array([1.0, 0.0, 0.0]), rng(0)) == (0, 0.0)
    p = np.array([0.2, 0.5, 0.3])
    a = [sample_action(p, rng(9))[0] for _ in range(3)]
    r1, r2 = rng(10), rng(10)
    assert [sample_action(p, r1) for _ in range(20)] == [sample_action(p, r2) for _ in range(20)]
    r = rng(11)
    draws = np.array([sample_action(np.array([0.3, 0.7]), r)[0] for _ in range(10_000)])
    assert abs(draws.mean() - 0.7) < 0.02
    assert len(set(a)) == 1


def test_sample_never_picks_zero_mass():
    r = rng(12)
    p = np.array([0.0, 0.5, 0.0, 0.5, 0.0])
    assert {sample_action(p, r)[0] for _ in range(2000)} == {1, 3}


def test_score_function_identity():
    P = PolicyParams.init(13)
    X, S = inputs(6, 13)
    mask = np.array([1, 1, 0, 1, 1, 0], dtype=bool)
    p = decoder_forward(P, encoder_forward(P, X), S, mask)
    total = P.zeros_like()
    for a in np.flatnonzero(mask):
        g = grad_log_prob(P, X, S, mask, int(a))
        for k in total:
            total[k] += p[a] * g[k]
    assert max(np.abs(v).max() for v in total.values()) < 1e-8


def test_gradient_spot_check():
    """Full coverage lives in the acceptance suite; here a few coordinates per tensor."""
    P = PolicyParams.init(21)
    X, S = inputs(5, 21)
    mask = np.array([1, 0, 1, 1, 1], dtype=bool)
    g = grad_log_prob(P, X, S, mask, 2)
    h = 1e-5
    r = rng(22)
    for name, t in P.tensors.items():
        for _ in range(3):
            idx = tuple(int(r.integers(d)) for d in t.shape)
            tp, tm = t.copy(), t.copy()
            tp[idx] += h
            tm[idx] -= h
            fd = (log_prob(P.with_tensor(name, tp), X, S, mask, 2)
                  - log_prob(P.with_tensor(name, tm), X, S, mask, 2)) / (2 * h)
            assert g[name][idx] == pytest.approx(fd, rel=1e-4, abs=1e-7), name


def test_grad_rejects_masked_action():
    P = PolicyParams.init(0)
    X, S = inputs(3)
    with pytest.raises(ValueError):
        grad_log_prob(P, X, S, np.array([True, False, True]), 1)


def test_checkpoint_round_trip(tmp_path):
    P = PolicyParams.init(5)
    P.save(tmp_path / "p.bin")
    Q = PolicyParams.load(tmp_path / "p.bin")
    assert Q.names == P.names
    assert all(np.array_equal(P[k], Q[k]) for k in P.names)
    raw = dumps_params(P)
    assert raw.startswith(b"RZVPOLCY")
    assert len(raw) > 8 * P.n_params
    with pytest.raises(ValueError):
        loads_params(raw + b"x")
    with pytest.raises(ValueError):
        loads_params(b"NOTAPOLICY" + raw[10:])
