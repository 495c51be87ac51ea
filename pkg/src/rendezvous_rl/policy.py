"""Attention encoder-decoder policy over rendezvous stops, in float64 numpy.

Encoder: node coordinates -> linear -> one multi-head self-attention block
(residual + LayerNorm) -> feed-forward block (residual + LayerNorm).

Decoder: per-node state rows -> linear -> self-attention block giving the
context -> cross attention (context queries, encoder keys/values) ->
residual + LayerNorm -> feed-forward block -> one logit per node ->
masked softmax.

Forward functions broadcast over leading axes of any parameter tensor, which
lets a finite-difference check evaluate many perturbed copies in one call.
Backward functions are written out by hand and support unbatched parameters
only.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LN_EPS = 1e-5
N_ENC_FEATURES = 2
N_DEC_FEATURES = 7


class AllMaskedError(ValueError):
    """No valid action remains."""


# -- parameters --------------------------------------------------------------

def param_shapes(d_h: int = 32, heads: int = 4, d_ff: int = 128) -> dict[str, tuple[int, ...]]:
    if d_h % heads:
        raise ValueError("d_h must be divisible by heads")
    d_k = d_h // heads
    att = (heads, d_h, d_k)
    shapes: dict[str, tuple[int, ...]] = {
        "enc_in_W": (N_ENC_FEATURES, d_h), "enc_in_b": (d_h,),
        "enc_Wq": att, "enc_Wk": att, "enc_Wv": att,
        "enc_ln1_g": (d_h,), "enc_ln1_b": (d_h,),
        "enc_ff_W1": (d_h, d_ff), "enc_ff_b1": (d_ff,), "enc_ff_W2": (d_ff, d_h), "enc_ff_b2": (d_h,),
        "enc_ln2_g": (d_h,), "enc_ln2_b": (d_h,),
        "dec_in_W": (N_DEC_FEATURES, d_h), "dec_in_b": (d_h,),
        "dec_Wq": att, "dec_Wk": att, "dec_Wv": att,
        "dec_ln1_g": (d_h,), "dec_ln1_b": (d_h,),
        "dec_xWq": att, "dec_xWk": att, "dec_xWv": att,
        "dec_ln2_g": (d_h,), "dec_ln2_b": (d_h,),
        "dec_ff_W1": (d_h, d_ff), "dec_ff_b1": (d_ff,), "dec_ff_W2": (d_ff, d_h), "dec_ff_b2": (d_h,),
        "dec_ln3_g": (d_h,), "dec_ln3_b": (d_h,),
        "out_W": (d_h, 1),
    }
    return shapes


def _fan_in(name: str, shape: tuple[int, ...], d_h: int, d_ff: int) -> int:
    if len(shape) >= 2:
        return shape[-2]
    # biases share the fan-in of their weight matrix
    return {"enc_in_b": N_ENC_FEATURES, "dec_in_b": N_DEC_FEATURES,
            "enc_ff_b1": d_h, "dec_ff_b1": d_h, "enc_ff_b2": d_ff, "dec_ff_b2": d_ff}[name]


@dataclass
class PolicyParams:
    tensors: dict[str, np.ndarray]
    d_h: int = 32
    heads: int = 4
    d_ff: int = 128

    @classmethod
    def init(cls, seed: int, d_h: int = 32, heads: int = 4, d_ff: int = 128) -> "PolicyParams":
        """Uniform(+-1/sqrt(fan_in)) weights, unit LayerNorm gains, zero LayerNorm biases."""
        rng = np.random.Generator(np.random.Philox(seed))
        tensors = {}
        for name, shape in param_shapes(d_h, heads, d_ff).items():
            if "_ln" in name:
                tensors[name] = np.ones(shape) if name.endswith("_g") else np.zeros(shape)
            else:
                bound = 1.0 / np.sqrt(_fan_in(name, shape, d_h, d_ff))
                tensors[name] = rng.uniform(-bound, bound, size=shape)
        return cls(tensors, d_h, heads, d_ff)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    @property
    def names(self) -> list[str]:
        return list(self.tensors)

    @property
    def n_params(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def copy(self) -> "PolicyParams":
        return PolicyParams({k: v.copy() for k, v in self.tensors.items()}, self.d_h, self.heads, self.d_ff)

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}

    def with_tensor(self, name: str, value: np.ndarray) -> "PolicyParams":
        """Shallow copy with one tensor replaced (may carry extra leading axes)."""
        t = dict(self.tensors)
        t[name] = value
        return PolicyParams(t, self.d_h, self.heads, self.d_ff)

    def save(self, path) -> None:
        Path(path).write_bytes(dumps_params(self))

    @classmethod
    def load(cls, path) -> "PolicyParams":
        return loads_params(Path(path).read_bytes())


CHECKPOINT_MAGIC = b"RZVPOLCY"
CHECKPOINT_VERSION = 1


def dumps_params(params: PolicyParams) -> bytes:
    out = [CHECKPOINT_MAGIC, struct.pack("<5I", CHECKPOINT_VERSION, params.d_h, params.heads,
                                         params.d_ff, len(params.tensors))]
    for name, t in params.tensors.items():
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)) + raw)
        out.append(struct.pack("<B", t.ndim) + struct.pack(f"<{t.ndim}I", *t.shape))
        out.append(np.ascontiguousarray(t, dtype="<f8").tobytes())
    return b"".join(out)


def loads_params(buf: bytes) -> PolicyParams:
    if buf[:8] != CHECKPOINT_MAGIC:
        raise ValueError("not a policy checkpoint")
    version, d_h, heads, d_ff, count = struct.unpack_from("<5I", buf, 8)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off = 8 + 20
    tensors = {}
    for _ in range(count):
        (ln,) = struct.unpack_from("<H", buf, off)
        off += 2
        name = buf[off:off + ln].decode("utf-8")
        off += ln
        (ndim,) = struct.unpack_from("<B", buf, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", buf, off)
        off += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        tensors[name] = np.frombuffer(buf, dtype="<f8", count=size, offset=off).reshape(shape).astype(float)
        off += 8 * size
    if off != len(buf):
        raise ValueError("trailing bytes in checkpoint")
    expected = param_shapes(d_h, heads, d_ff)
    if {k: v.shape for k, v in tensors.items()} != expected:
        raise ValueError("checkpoint tensors do not match the architecture")
    return PolicyParams(tensors, d_h, heads, d_ff)


# -- layers ---------------------------------------------------------------------

def _bias(b: np.ndarray) -> np.ndarray:
    return b[..., None, :]


def linear(x, W, b=None):
    y = x @ W
    return y if b is None else y + _bias(b)


def layer_norm(x, gain, bias, eps: float = LN_EPS):
    """LayerNorm over the last axis with population variance."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2:
        raise ValueError("layer_norm needs at least two features")
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    xhat = (x - mu) / np.sqrt(var + eps)
    g, b = np.asarray(gain, dtype=float), np.asarray(bias, dtype=float)
    if g.ndim >= 1 and x.ndim >= 2:
        g, b = g[..., None, :] if g.ndim > 1 else g, b[..., None, :] if b.ndim > 1 else b
    return xhat * g + b


def _ln_fwd(x, g, b, eps=LN_EPS):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    return xhat * _bias(g) + _bias(b), (xhat, inv, g)


def _ln_bwd(dy, cache):
    xhat, inv, g = cache
    dg = (dy * xhat).sum(axis=0)
    db = dy.sum(axis=0)
    dxh = dy * g
    dx = inv * (dxh - dxh.mean(axis=-1, keepdims=True) - xhat * (dxh * xhat).mean(axis=-1, keepdims=True))
    return dx, dg, db


def _softmax_last(s):
    s = s - s.max(axis=-1, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=-1, keepdims=True)


def mha_forward(q_src, kv_src, Wq, Wk, Wv, return_cache: bool = False):
    """Multi-head scaled dot-product attention with concatenated heads.

    ``W*`` have shape ``(..., heads, d_h, d_k)``; the output is ``(..., n_q, heads*d_k)``.
    """
    d_k = Wq.shape[-1]
    xq = q_src[..., None, :, :]
    xkv = kv_src[..., None, :, :]
    q = xq @ Wq
    k = xkv @ Wk
    v = xkv @ Wv
    A = _softmax_last(q @ np.swapaxes(k, -1, -2) / np.sqrt(d_k))
    Z = A @ v  # (..., heads, n_q, d_k)
    Zt = np.moveaxis(Z, -3, -2)
    out = Zt.reshape(*Zt.shape[:-2], Zt.shape[-2] * Zt.shape[-1])
    if return_cache:
        return out, (q_src, kv_src, q, k, v, A, Wq, Wk, Wv)
    return out


def _mha_bwd(dout, cache):
    q_src, kv_src, q, k, v, A, Wq, Wk, Wv = cache
    heads, _, d_k = Wq.shape
    n_q = dout.shape[0]
    dZ = np.moveaxis(dout.reshape(n_q, heads, d_k), 1, 0)  # (heads, n_q, d_k)
    dA = dZ @ np.swapaxes(v, -1, -2)
    dv = np.swapaxes(A, -1, -2) @ dZ
    dS = A * (dA - (dA * A).sum(axis=-1, keepdims=True)) / np.sqrt(d_k)
    dq = dS @ k
    dk = np.swapaxes(dS, -1, -2) @ q
    dWq = q_src.T[None] @ dq
    dWk = kv_src.T[None] @ dk
    dWv = kv_src.T[None] @ dv
    dq_src = (dq @ np.swapaxes(Wq, -1, -2)).sum(axis=0)
    dkv_src = (dk @ np.swapaxes(Wk, -1, -2) + dv @ np.swapaxes(Wv, -1, -2)).sum(axis=0)
    return dq_src, dkv_src, dWq, dWk, dWv


def _ff_fwd(x, W1, b1, W2, b2):
    """FF(ReLU(x)) with an inner ReLU between the two linear maps."""
    u = np.maximum(x, 0.0)
    h1 = linear(u, W1, b1)
    a1 = np.maximum(h1, 0.0)
    return linear(a1, W2, b2), (x, u, h1, a1, W1, W2)


def _ff_bwd(df, cache):
    x, u, h1, a1, W1, W2 = cache
    dW2 = a1.T @ df
    db2 = df.sum(axis=0)
    dh1 = (df @ W2.T) * (h1 > 0)
    dW1 = u.T @ dh1
    db1 = dh1.sum(axis=0)
    dx = (dh1 @ W1.T) * (x > 0)
    return dx, dW1, db1, dW2, db2


def masked_softmax(logits, mask):
    """Softmax over unmasked entries; masked entries get exactly zero."""
    logits = np.asarray(logits, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise AllMaskedError("every action is masked")
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(z), 0.0)
    return e / e.sum(axis=-1, keepdims=True)


def masked_log_softmax(logits, mask):
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise AllMaskedError("every action is masked")
    z = np.where(mask, logits, -np.inf)
    m = z.max(axis=-1, keepdims=True)
    lse = m + np.log(np.where(mask, np.exp(z - m), 0.0).sum(axis=-1, keepdims=True))
    return np.where(mask, z - lse, -np.inf)


# -- network --------------------------------------------------------------------

def encoder_forward(params: PolicyParams, coords, return_cache: bool = False):
    """Node embeddings ``(..., n, d_h)`` from normalized coordinates ``(n, 2)``."""
    P = params.tensors
    h0 = linear(coords, P["enc_in_W"], P["enc_in_b"])
    att, c_att = mha_forward(h0, h0, P["enc_Wq"], P["enc_Wk"], P["enc_Wv"], True)
    hr, c_ln1 = _ln_fwd(h0 + att, P["enc_ln1_g"], P["enc_ln1_b"])
    ff, c_ff = _ff_fwd(hr, P["enc_ff_W1"], P["enc_ff_b1"], P["enc_ff_W2"], P["enc_ff_b2"])
    hf, c_ln2 = _ln_fwd(hr + ff, P["enc_ln2_g"], P["enc_ln2_b"])
    if return_cache:
        return hf, {"coords": np.asarray(coords), "att": c_att, "ln1": c_ln1, "ff": c_ff, "ln2": c_ln2}
    return hf


def decoder_logits(params: PolicyParams, h_f, state_feats, return_cache: bool = False):
    P = params.tensors
    H0 = linear(state_feats, P["dec_in_W"], P["dec_in_b"])
    sa, c_sa = mha_forward(H0, H0, P["dec_Wq"], P["dec_Wk"], P["dec_Wv"], True)
    Hcon, c_ln1 = _ln_fwd(H0 + sa, P["dec_ln1_g"], P["dec_ln1_b"])
    Hattn, c_x = mha_forward(Hcon, h_f, P["dec_xWq"], P["dec_xWk"], P["dec_xWv"], True)
    Hr, c_ln2 = _ln_fwd(Hattn + Hcon, P["dec_ln2_g"], P["dec_ln2_b"])
    ff, c_ff = _ff_fwd(Hr, P["dec_ff_W1"], P["dec_ff_b1"], P["dec_ff_W2"], P["dec_ff_b2"])
    Hf, c_ln3 = _ln_fwd(Hr + ff, P["dec_ln3_g"], P["dec_ln3_b"])
    logits = (Hf @ P["out_W"])[..., 0]
    if return_cache:
        return logits, {"feats": np.asarray(state_feats), "sa": c_sa, "ln1": c_ln1, "x": c_x,
                        "ln2": c_ln2, "ff": c_ff, "ln3": c_ln3, "Hf": Hf}
    return logits


def decoder_forward(params: PolicyParams, h_f, state_feats, mask):
    """Action probabilities over the ``n`` task points."""
    return masked_softmax(decoder_logits(params, h_f, state_feats), mask)


def log_prob(params: PolicyParams, coords, state_feats, mask, action: int):
    """``log pi(action | state)``; broadcasts over leading parameter axes."""
    h_f = encoder_forward(params, coords)
    return masked_log_softmax(decoder_logits(params, h_f, state_feats), mask)[..., action]


def _decoder_backward(params: PolicyParams, cache, dlogits, grads) -> np.ndarray:
    P = params.tensors
    grads["out_W"] += cache["Hf"].T @ dlogits[:, None]
    dHf = dlogits[:, None] * P["out_W"][:, 0][None, :]
    dz, dg, db = _ln_bwd(dHf, cache["ln3"])
    grads["dec_ln3_g"] += dg
    grads["dec_ln3_b"] += db
    dHr = dz
    dx, dW1, db1, dW2, db2 = _ff_bwd(dz, cache["ff"])
    grads["dec_ff_W1"] += dW1
    grads["dec_ff_b1"] += db1
    grads["dec_ff_W2"] += dW2
    grads["dec_ff_b2"] += db2
    dHr = dHr + dx
    dz, dg, db = _ln_bwd(dHr, cache["ln2"])
    grads["dec_ln2_g"] += dg
    grads["dec_ln2_b"] += db
    dq_src, dhf, dWq, dWk, dWv = _mha_bwd(dz, cache["x"])
    grads["dec_xWq"] += dWq
    grads["dec_xWk"] += dWk
    grads["dec_xWv"] += dWv
    dHcon = dz + dq_src
    dz, dg, db = _ln_bwd(dHcon, cache["ln1"])
    grads["dec_ln1_g"] += dg
    grads["dec_ln1_b"] += db
    dq1, dkv1, dWq, dWk, dWv = _mha_bwd(dz, cache["sa"])
    grads["dec_Wq"] += dWq
    grads["dec_Wk"] += dWk
    grads["dec_Wv"] += dWv
    dH0 = dz + dq1 + dkv1
    grads["dec_in_W"] += cache["feats"].T @ dH0
    grads["dec_in_b"] += dH0.sum(axis=0)
    return dhf


def _encoder_backward(params: PolicyParams, cache, dhf, grads) -> None:
    dz, dg, db = _ln_bwd(dhf, cache["ln2"])
    grads["enc_ln2_g"] += dg
    grads["enc_ln2_b"] += db
    dx, dW1, db1, dW2, db2 = _ff_bwd(dz, cache["ff"])
    grads["enc_ff_W1"] += dW1
    grads["enc_ff_b1"] += db1
    grads["enc_ff_W2"] += dW2
    grads["enc_ff_b2"] += db2
    dhr = dz + dx
    dz, dg, db = _ln_bwd(dhr, cache["ln1"])
    grads["enc_ln1_g"] += dg
    grads["enc_ln1_b"] += db
    dq, dkv, dWq, dWk, dWv = _mha_bwd(dz, cache["att"])
    grads["enc_Wq"] += dWq
    grads["enc_Wk"] += dWk
    grads["enc_Wv"] += dWv
    dh0 = dz + dq + dkv
    grads["enc_in_W"] += cache["coords"].T @ dh0
    grads["enc_in_b"] += dh0.sum(axis=0)


def weighted_score_gradient(params: PolicyParams, coords, steps) -> dict[str, np.ndarray]:
    """``sum_t w_t * grad log pi(a_t | s_t)`` over one episode.

    ``steps`` holds ``(state_feats, mask, action, weight)`` tuples. The encoder
    runs forward and backward once because its input never changes.
    """
    grads = params.zeros_like()
    h_f, enc_cache = encoder_forward(params, coords, return_cache=True)
    dhf = np.zeros_like(h_f)
    for feats, mask, action, weight in steps:
        if weight == 0:
            continue
        logits, cache = decoder_logits(params, h_f, feats, return_cache=True)
        probs = masked_softmax(logits, mask)
        dlogits = -probs
        dlogits[action] += 1.0
        dhf += _decoder_backward(params, cache, weight * dlogits, grads)
    _encoder_backward(params, enc_cache, dhf, grads)
    return grads


def grad_log_prob(params: PolicyParams, coords, state_feats, mask, action: int) -> dict[str, np.ndarray]:
    """Exact gradient of ``log pi(action | state)`` for every parameter tensor."""
    if not np.asarray(mask, dtype=bool)[action]:
        raise ValueError(f"action {action} is masked")
    return weighted_score_gradient(params, coords, [(state_feats, mask, action, 1.0)])


def sample_action(probs, rng: np.random.Generator) -> tuple[int, float]:
    """Inverse-CDF categorical draw using one ``rng.random()`` call."""
    probs = np.asarray(probs, dtype=float)
    u = rng.random()
    cdf = np.cumsum(probs)
    a = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    a = min(a, len(probs) - 1)
    while probs[a] == 0.0:  # u landed on the upper edge of a zero-width bin
        a -= 1
    return a, float(np.log(probs[a]))


def greedy_action(probs) -> tuple[int, float]:
    a = int(np.argmax(probs))
    return a, float(np.log(probs[a]))
