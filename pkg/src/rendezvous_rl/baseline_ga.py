"""Genetic-algorithm baseline over fixed-length rendezvous-stop sequences.

A chromosome is scored by rolling it out through the same environment the
policy uses: genes are consumed in order, masked genes are skipped, and the
fitness is the episode's summed reward.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import Env, Episode, PlannerConfig, RewardParams
from .scenario import Scenario

Chromosome = tuple[int, ...]


@dataclass(frozen=True)
class GAParams:
    pop: int = 50
    generations: int = 100
    elite: int = 2
    tourney_k: int = 3
    p_cx: float = 0.8
    p_mut: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.pop < 1 or self.generations < 0 or self.tourney_k < 1:
            raise ValueError("pop and tourney_k must be >= 1, generations >= 0")
        if not 0 <= self.elite <= self.pop:
            raise ValueError("elite must lie in [0, pop]")
        if not (0.0 <= self.p_cx <= 1.0 and 0.0 <= self.p_mut <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")


def ga_rollout(env: Env, chromosome) -> Episode:
    """Play genes in order, skipping masked ones; running out of genes is a failure."""
    on_road = set(env.scenario.on_road_ids)
    if any(g not in on_road for g in chromosome):
        raise ValueError("every gene must index an on-road task point")
    ep = Episode()
    state = env.reset()
    ep.states.append(state)
    done = state.complete
    genes = iter(chromosome)
    while not done:
        mask = env.mask(state)
        gene = next((g for g in genes if mask[g]), None)
        if gene is None:
            if ep.rewards:
                ep.rewards[-1] -= env.reward_params.penalty
            else:
                ep.rewards.append(-env.reward_params.penalty)
            break
        state, r, done, out = env.step(state, gene)
        ep.actions.append(gene)
        ep.rewards.append(r)
        ep.outcomes.append(out)
        ep.states.append(state)
    ep.success = state.complete
    return ep


def ga_fitness(scenario: Scenario | Env, chromosome) -> float:
    env = scenario if isinstance(scenario, Env) else Env(scenario)
    return ga_rollout(env, chromosome).total_reward


def random_chromosome(env: Env, rng: np.random.Generator) -> Chromosome:
    ids = np.asarray(env.scenario.on_road_ids)
    return tuple(int(g) for g in rng.choice(ids, size=env.max_steps))


def _tournament(fitnesses, k: int, rng: np.random.Generator) -> int:
    picks = rng.integers(len(fitnesses), size=k)
    return int(max(picks, key=lambda i: (fitnesses[i], -i)))


def ga_evolve_generation(population, fitnesses, params: GAParams, rng: np.random.Generator,
                         gene_pool) -> list[Chromosome]:
    """Elitism, tournament selection, one-point crossover, per-gene mutation."""
    if not population:
        raise ValueError("population must be non-empty")
    n = len(population)
    order = sorted(range(n), key=lambda i: (-fitnesses[i], i))
    new = [tuple(population[i]) for i in order[:params.elite]]
    pool = np.asarray(gene_pool)
    while len(new) < n:
        a = list(population[_tournament(fitnesses, params.tourney_k, rng)])
        b = list(population[_tournament(fitnesses, params.tourney_k, rng)])
        if len(a) > 1 and rng.random() < params.p_cx:
            cut = int(rng.integers(1, len(a)))
            a, b = a[:cut] + b[cut:], b[:cut] + a[cut:]
        for child in (a, b):
            if len(new) == n:
                break
            for i in range(len(child)):
                if rng.random() < params.p_mut:
                    child[i] = int(pool[rng.integers(len(pool))])
            new.append(tuple(child))
    return new


@dataclass
class GAResult:
    best: Chromosome
    best_fitness: float
    history: list[float]  # best-so-far fitness, generation 0 first
    episode: Episode
    evaluations: int = 0
    mean_history: list[float] = field(default_factory=list)


def ga_run(scenario: Scenario | Env, params: GAParams = GAParams(), *,
           reward_params: RewardParams = RewardParams(),
           planner: PlannerConfig = PlannerConfig()) -> GAResult:
    env = scenario if isinstance(scenario, Env) else Env(scenario, reward_params, planner)
    rng = np.random.Generator(np.random.Philox(params.seed))
    memo: dict[Chromosome, float] = {}

    def fit(c: Chromosome) -> float:
        if c not in memo:
            memo[c] = ga_rollout(env, c).total_reward
        return memo[c]

    population = [random_chromosome(env, rng) for _ in range(params.pop)]
    fits = [fit(c) for c in population]
    best_i = int(np.argmax(fits))
    best, best_fit = population[best_i], fits[best_i]
    history, means = [best_fit], [float(np.mean(fits))]
    for _ in range(params.generations):
        population = ga_evolve_generation(population, fits, params, rng, env.scenario.on_road_ids)
        fits = [fit(c) for c in population]
        i = int(np.argmax(fits))
        if fits[i] > best_fit:
            best, best_fit = population[i], fits[i]
        history.append(best_fit)
        means.append(float(np.mean(fits)))
    return GAResult(best, best_fit, history, ga_rollout(env, best), len(memo), means)
