# Attention policy and its hand-written gradient
# -----------------------------------------------
import numpy as np

from rendezvous_rl.policy import PolicyParams, decoder_forward, encoder_forward, grad_log_prob, log_prob

rng = np.random.Generator(np.random.Philox(0))
P = PolicyParams.init(seed=0)
print(f"{P.n_params} parameters in {len(P.names)} tensors")

coords, feats = rng.random((5, 2)), rng.random((5, 7))
mask = np.array([True, True, False, True, True])
probs = decoder_forward(P, encoder_forward(P, coords), feats, mask)
print("action probabilities:", probs.round(4))

# %% Check a handful of coordinates against central differences
g = grad_log_prob(P, coords, feats, mask, action=3)
h = 1e-5
for name in ("enc_in_W", "dec_xWk", "out_W"):
    t = P[name]
    idx = (0,) * t.ndim
    up, down = t.copy(), t.copy()
    up[idx] += h
    down[idx] -= h
    fd = (log_prob(P.with_tensor(name, up), coords, feats, mask, 3)
          - log_prob(P.with_tensor(name, down), coords, feats, mask, 3)) / (2 * h)
    print(f"{name}{list(idx)}: analytic {g[name][idx]: .8e}  finite-diff {fd: .8e}")
