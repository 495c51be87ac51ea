"""REINFORCE without a baseline on a single fixed scenario."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import Env, Episode, PlannerConfig, RewardParams
from .policy import (
    PolicyParams,
    decoder_forward,
    encoder_forward,
    greedy_action,
    sample_action,
    weighted_score_gradient,
)
from .scenario import Scenario


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch: int = 1
    episode_cap: int | None = None  # None -> the env's max_steps
    learning_rate: float = 0.005
    gamma: float = 1.0
    seed: int = 0
    clip_norm: float | None = 10.0
    checkpoint_every: int = 0  # epochs between checkpoints; 0 disables
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.epochs < 1 or self.batch < 1 or (self.episode_cap is not None and self.episode_cap < 1):
            raise ValueError("epochs, batch and episode_cap must be >= 1")


@dataclass(frozen=True)
class TrajStep:
    feats: np.ndarray
    mask: np.ndarray
    action: int
    log_prob: float
    reward: float


@dataclass
class Trajectory:
    coords: np.ndarray
    steps: list[TrajStep] = field(default_factory=list)
    success: bool = False
    episode: Episode | None = None

    @property
    def rewards(self) -> list[float]:
        return [s.reward for s in self.steps]

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))


def rng_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent Philox streams for initialization and action sampling."""
    init_ss, roll_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.Philox(init_ss)), np.random.Generator(np.random.Philox(roll_ss))


def compute_returns(rewards, gamma: float) -> list[float]:
    if len(rewards) == 0:
        raise ValueError("rewards must be non-empty")
    out = [0.0] * len(rewards)
    g = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        g = rewards[t] + gamma * g
        out[t] = g
    return out


def rollout(env: Env, params: PolicyParams, rng: np.random.Generator | None = None,
            mode: str = "sample", cap: int | None = None) -> Trajectory:
    """One mission under the policy; ``greedy`` takes the argmax action."""
    if mode not in ("sample", "greedy"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "sample" and rng is None:
        raise ValueError("sample mode needs an rng")
    sc = env.scenario
    coords = sc.normalize(sc.coords)
    h_f = encoder_forward(params, coords)
    traj = Trajectory(coords)
    ep = Episode()
    state = env.reset()
    ep.states.append(state)
    cap = env.max_steps if cap is None else min(cap, env.max_steps)
    done = state.complete
    while not done:
        mask = env.mask(state)
        if not mask.any():
            break
        feats = env.encode(state)
        probs = decoder_forward(params, h_f, feats, mask)
        a, lp = sample_action(probs, rng) if mode == "sample" else greedy_action(probs)
        state, r, done, out = env.step(state, a)
        if not done and len(traj.steps) + 1 >= cap:
            # truncated by a cap tighter than the env horizon
            r -= env.reward_params.penalty
            done = True
        traj.steps.append(TrajStep(feats, mask, a, lp, r))
        ep.actions.append(a)
        ep.rewards.append(r)
        ep.outcomes.append(out)
        ep.states.append(state)
    traj.success = ep.success = state.complete
    traj.episode = ep
    return traj


def policy_gradient(params: PolicyParams, trajectories, gamma: float) -> dict[str, np.ndarray]:
    """Batch mean of return-weighted score gradients."""
    total = params.zeros_like()
    for traj in trajectories:
        if not traj.steps:
            continue
        G = compute_returns(traj.rewards, gamma)
        g = weighted_score_gradient(params, traj.coords,
                                    [(s.feats, s.mask, s.action, w) for s, w in zip(traj.steps, G)])
        for k in total:
            total[k] += g[k]
    for k in total:
        total[k] /= max(len(trajectories), 1)
    return total


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))


def reinforce_update(params: PolicyParams, trajectories, alpha: float, gamma: float,
                     clip_norm: float | None = 10.0) -> PolicyParams:
    """One gradient-ascent step; returns new parameters."""
    grads = policy_gradient(params, trajectories, gamma)
    scale = alpha
    if clip_norm is not None:
        norm = global_norm(grads)
        if norm > clip_norm:
            scale *= clip_norm / norm
    new = params.copy()
    for k, g in grads.items():
        new.tensors[k] += scale * g
    return new


@dataclass
class TrainResult:
    params: PolicyParams
    reward_log: list[float]  # mean episode reward per epoch
    success_log: list[float]  # fraction of successful episodes per epoch


def train(scenario: Scenario | Env, config: TrainConfig = TrainConfig(),
          init: PolicyParams | None = None, *,
          reward_params: RewardParams = RewardParams(),
          planner: PlannerConfig = PlannerConfig()) -> TrainResult:
    """Run ``epochs`` updates of ``batch`` sampled episodes each."""
    env = scenario if isinstance(scenario, Env) else Env(scenario, reward_params, planner)
    init_rng, roll_rng = rng_streams(config.seed)
    params = init.copy() if init is not None else PolicyParams.init(int(init_rng.integers(2**63)))
    rewards, successes = [], []
    for epoch in range(config.epochs):
        batch = [rollout(env, params, roll_rng, "sample", config.episode_cap) for _ in range(config.batch)]
        rewards.append(float(np.mean([t.total_reward for t in batch])))
        successes.append(float(np.mean([t.success for t in batch])))
        params = reinforce_update(params, batch, config.learning_rate, config.gamma, config.clip_norm)
        if config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
            out = Path(config.checkpoint_dir or ".")
            out.mkdir(parents=True, exist_ok=True)
            params.save(out / f"policy-{epoch + 1:05d}.bin")
    return TrainResult(params, rewards, successes)


def write_log(values, path, header: tuple[str, str] = ("episode", "mean_reward")) -> None:
    """Two-column tab-separated log, 1-based index."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{header[0]}\t{header[1]}\n")
        for i, v in enumerate(values, start=1):
            fh.write(f"{i}\t{float(v)!r}\n")


def read_log(path) -> list[float]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()[1:]
    return [float(line.split("\t")[1]) for line in lines if line]
