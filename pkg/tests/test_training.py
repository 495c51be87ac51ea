import numpy as np
import pytest

from rendezvous_rl.policy import PolicyParams, decoder_forward, encoder_forward, grad_log_prob, log_prob
from rendezvous_rl.training import (
    TrainConfig,
    Trajectory,
    TrajStep,
    compute_returns,
    policy_gradient,
    read_log,
    reinforce_update,
    rollout,
    train,
    write_log,
)


def test_compute_returns():
    assert compute_returns([1, 1, 1], 1.0) == [3, 2, 1]
    assert compute_returns([0, 0, 8], 0.5) == [2, 4, 8]
    assert compute_returns([5], 0.3) == [5]
    with pytest.raises(ValueError):
        compute_returns([], 1.0)


@pytest.mark.parametrize("kw", [dict(learning_rate=0), dict(gamma=1.5), dict(epochs=0), dict(batch=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


def _toy(seed=0, n=4):
    r = np.random.Generator(np.random.Philox(seed))
    return r.random((n, 2)), r.random((n, 7))


def test_zero_returns_leave_params_unchanged():
    P = PolicyParams.init(0)
    X, S = _toy()
    mask = np.ones(4, dtype=bool)
    traj = Trajectory(X, [TrajStep(S, mask, 1, -1.0, 0.0), TrajStep(S, mask, 2, -1.0, 0.0)])
    Q = reinforce_update(P, [traj], 0.1, 1.0)
    assert all(np.array_equal(P[k], Q[k]) for k in P.names)


def test_single_step_update_formula():
    P = PolicyParams.init(1)
    X, S = _toy(1)
    mask = np.array([1, 1, 0, 1], dtype=bool)
    G, alpha = 2.5, 0.01
    Q = reinforce_update(P, [Trajectory(X, [TrajStep(S, mask, 3, -1.0, G)])], alpha, 1.0, clip_norm=None)
    g = grad_log_prob(P, X, S, mask, 3)
    for k in P.names:
        assert np.allclose(Q[k] - P[k], alpha * G * g[k], rtol=1e-12, atol=1e-15)


def test_clipping_bounds_step():
    P = PolicyParams.init(2)
    X, S = _toy(2)
    mask = np.ones(4, dtype=bool)
    traj = Trajectory(X, [TrajStep(S, mask, 0, -1.0, 1e6)])
    Q = reinforce_update(P, [traj], 1.0, 1.0, clip_norm=10.0)
    step = np.sqrt(sum(((Q[k] - P[k]) ** 2).sum() for k in P.names))
    assert step == pytest.approx(10.0)


def test_trajectory_gradient_matches_finite_differences():
    P = PolicyParams.init(3)
    X, _ = _toy(3, 5)
    r = np.random.Generator(np.random.Philox(4))
    steps = []
    for t in range(3):
        S = r.random((5, 7))
        mask = r.random(5) < 0.7
        mask[t] = True
        steps.append(TrajStep(S, mask, t, 0.0, float(r.normal() * 10)))
    traj = Trajectory(X, steps)
    g = policy_gradient(P, [traj], 0.9)
    G = compute_returns(traj.rewards, 0.9)

    def objective(params):
        return sum(w * log_prob(params, X, s.feats, s.mask, s.action) for s, w in zip(steps, G))

    h = 1e-5
    for name in ("enc_in_W", "enc_Wk", "dec_xWq", "dec_ff_W1", "out_W", "enc_ln1_g"):
        t = P[name]
        idx = tuple(int(r.integers(d)) for d in t.shape)
        tp, tm = t.copy(), t.copy()
        tp[idx] += h
        tm[idx] -= h
        fd = (objective(P.with_tensor(name, tp)) - objective(P.with_tensor(name, tm))) / (2 * h)
        assert g[name][idx] == pytest.approx(fd, rel=1e-4, abs=1e-7)


def test_two_armed_bandit():
    P = PolicyParams.init(5)
    X, S = _toy(5, 2)
    mask = np.ones(2, dtype=bool)
    r = np.random.Generator(np.random.Philox(6))
    h = None
    for _ in range(200):
        h = encoder_forward(P, X)
        p = decoder_forward(P, h, S, mask)
        a = int(r.random() < p[1])
        traj = Trajectory(X, [TrajStep(S, mask, a, float(np.log(p[a])), 1.0 if a == 1 else -1.0)])
        P = reinforce_update(P, [traj], 0.05, 1.0)
    assert decoder_forward(P, encoder_forward(P, X), S, mask)[1] > 0.9


def test_train_one_epoch(grid12_env):
    res = train(grid12_env, TrainConfig(epochs=1, seed=3))
    assert len(res.reward_log) == 1 and len(res.success_log) == 1


def test_train_deterministic(grid12_env):
    a = train(grid12_env, TrainConfig(epochs=8, seed=9))
    b = train(grid12_env, TrainConfig(epochs=8, seed=9))
    assert a.reward_log == b.reward_log
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params.names)
    c = train(grid12_env, TrainConfig(epochs=8, seed=10))
    assert c.reward_log != a.reward_log


def test_train_checkpoints(grid12_env, tmp_path):
    train(grid12_env, TrainConfig(epochs=4, seed=1, checkpoint_every=2, checkpoint_dir=str(tmp_path)))
    assert sorted(p.name for p in tmp_path.iterdir()) == ["policy-00002.bin", "policy-00004.bin"]


def test_rollout_modes(grid12_env):
    P = PolicyParams.init(0)
    g1 = rollout(grid12_env, P, mode="greedy")
    g2 = rollout(grid12_env, P, mode="greedy")
    assert [s.action for s in g1.steps] == [s.action for s in g2.steps]
    t = rollout(grid12_env, P, np.random.Generator(np.random.Philox(0)), cap=3)
    assert len(t.steps) <= 3
    for s in t.steps:
        assert s.mask[s.action]
    with pytest.raises(ValueError):
        rollout(grid12_env, P, mode="beam")


def test_log_round_trip(tmp_path):
    p = tmp_path / "log.tsv"
    write_log([1.5, -2.25, 1 / 3], p)
    assert p.read_text().splitlines()[0] == "episode\tmean_reward"
    assert read_log(p) == [1.5, -2.25, 1 / 3]
