"""Rendezvous-selection MDP.

A decision happens whenever the UAV has docked: the action is the on-road
task point where the next rendezvous takes place. The UAV is always refilled
before it flies again, so fuel never enters the state.

Rewards are in minutes: ``-(route + recharge + hover + UGV wait) / 60``, plus
``bonus`` on the step that completes the mission, minus ``penalty`` on the step
that ends it unsuccessfully.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .energy import hover_power, recharge_time, uav_power
from .evrptw import DEFAULT_DROP_PENALTY, TabuParams
from .planners import (
    DEFAULT_WINDOW,
    StepOutcome,
    TraceEvent,
    UGVLeg,
    _along,
    assemble_step,
    plan_uav_sortie,
    plan_ugv_leg,
)
from .scenario import Scenario, SNAP_TOLERANCE


class MaskedActionError(ValueError):
    pass


@dataclass(frozen=True)
class State:
    uav_pos: tuple[float, float]
    ugv_pos: tuple[float, float]
    visited: tuple[bool, ...]
    clock: float
    step_index: int
    ugv_node: int
    pending_recharge: float = 0.0  # recharge owed before the next takeoff, s

    @property
    def n_visited(self) -> int:
        return sum(self.visited)

    @property
    def complete(self) -> bool:
        return all(self.visited)


@dataclass(frozen=True)
class RewardParams:
    bonus: float = 10_000.0
    penalty: float = 1_000.0
    max_steps: int | None = None  # None -> 2 * number of on-road points

    def steps_for(self, scenario: Scenario) -> int:
        return self.max_steps if self.max_steps is not None else 2 * len(scenario.on_road_ids)


@dataclass(frozen=True)
class PlannerConfig:
    window: float = DEFAULT_WINDOW
    drop_penalty: float = DEFAULT_DROP_PENALTY
    tabu: TabuParams = field(default_factory=TabuParams)


def reset(scenario: Scenario) -> State:
    xy = tuple(float(v) for v in scenario.node_xy(scenario.depot))
    at_depot = set(scenario.node_points.get(scenario.depot, ()))
    for p in scenario.task_points:
        if math.hypot(p.x - xy[0], p.y - xy[1]) <= SNAP_TOLERANCE:
            at_depot.add(p.id)
    visited = tuple(i in at_depot for i in range(scenario.n_points))
    return State(xy, xy, visited, 0.0, 0, scenario.depot, 0.0)


def compute_reward(t_route: float, t_recharge: float, t_uav_idle: float, t_ugv_idle: float,
                   success: bool, failure: bool, params: RewardParams = RewardParams()) -> float:
    """Step reward from its time terms in seconds."""
    minutes = (t_route + t_recharge + t_uav_idle + t_ugv_idle) / 60.0
    return -minutes + (params.bonus if success else 0.0) - (params.penalty if failure else 0.0)


def _ride(scenario: Scenario, leg: UGVLeg, pending: float):
    ride = min(scenario.params.ugv_speed * pending, leg.distance)
    takeoff = _along(scenario, leg.waypoints, leg.cum_dist, ride)
    return ride, takeoff


def _direct_ok(scenario: Scenario, state: State, stop: int, config: PlannerConfig) -> bool:
    """Direct takeoff -> stop flight fits fuel and window after the pending ride."""
    p = scenario.params
    leg = plan_ugv_leg(scenario, state.ugv_node, stop, 0.0)
    _, takeoff = _ride(scenario, leg, state.pending_recharge)
    flight = math.dist(takeoff, scenario.coords[stop]) / p.uav_speed
    budget = min(p.fuel_capacity / uav_power(p.uav_speed, p.power),
                 leg.arrive + config.window - state.pending_recharge)
    return flight <= budget + 1e-9


def valid_action_mask(scenario: Scenario, state: State,
                      config: PlannerConfig = PlannerConfig()) -> np.ndarray:
    """On-road, road-reachable stops the UAV can reach on a full tank.

    Reach is measured from the actual takeoff point, i.e. after the docked
    ride toward the stop that the pending recharge buys, and must also fit
    the rendezvous window.
    """
    mask = np.zeros(scenario.n_points, dtype=bool)
    for pid in scenario.on_road_ids:
        if scenario.road.connected(state.ugv_node, scenario.point_node[pid]):
            mask[pid] = _direct_ok(scenario, state, pid, config)
    return mask


def _plan_relative(scenario: Scenario, state: State, action: int, config: PlannerConfig) -> StepOutcome:
    """Plan one rendezvous with the decision instant at t = 0."""
    p = scenario.params
    pending = state.pending_recharge
    unvisited = {i for i, v in enumerate(state.visited) if not v}

    leg = plan_ugv_leg(scenario, state.ugv_node, action, 0.0)
    ride, takeoff = _ride(scenario, leg, pending)
    ride_ids, leg_ids = [], []
    for pid in leg.visited_points:
        if pid not in unvisited or pid in ride_ids or pid in leg_ids:
            continue
        d = leg.point_distance(scenario, pid)
        (ride_ids if pending > 0 and d <= ride else leg_ids).append(pid)
    candidates = unvisited - set(ride_ids) - set(leg_ids) - {action}

    window = (leg.arrive, leg.arrive + config.window)
    sortie = plan_uav_sortie(scenario, takeoff, action, candidates, window, pending,
                             config.drop_penalty, config.tabu)
    dock_fuel = max(0.0, sortie.fuel_at_D - hover_power(p.power) * sortie.hover)
    t_r = recharge_time(dock_fuel, p.fuel_capacity, p.recharge_rate)
    out = assemble_step(leg, sortie, t_r, ride_visited=ride_ids, leg_visited=leg_ids,
                        fuel_at_dock=dock_fuel)
    return replace(out, events=tuple(_events(scenario, leg, sortie, ride, ride_ids, leg_ids, out)))


def _events(scenario: Scenario, leg: UGVLeg, sortie, ride: float, ride_ids, leg_ids, out: StepOutcome):
    v_g = scenario.params.ugv_speed
    nodes = scenario.road.nodes
    ev: list[TraceEvent] = []
    for node, c in zip(leg.waypoints[1:], leg.cum_dist[1:]):
        ev.append(TraceEvent(c / v_g, "UGV", float(nodes[node][0]), float(nodes[node][1]), "move"))
    for pid in (*ride_ids, *leg_ids):
        c = leg.point_distance(scenario, pid)
        x, y = scenario.coords[pid]
        ev.append(TraceEvent(c / v_g, "UGV", float(x), float(y), "visit", pid))
    sx, sy = sortie.start_xy
    ev.append(TraceEvent(sortie.depart, "UAV", sx, sy, "takeoff"))
    inst, sol = sortie.instance, sortie.solution
    for v, t in zip(sol.route[1:-1], sol.arrival[1:-1]):
        x, y = inst.points[v]
        ev.append(TraceEvent(t, "UAV", float(x), float(y), "visit", inst.candidate_ids[v - 1]))
    dx, dy = (float(c) for c in inst.terminal)
    if sortie.hover > 0:
        ev.append(TraceEvent(sortie.raw_arrival, "UAV", dx, dy, "hover"))
    if out.t_ugv_idle > 0:
        ev.append(TraceEvent(out.dock_time - out.t_ugv_idle, "UGV", dx, dy, "wait"))
    ev.append(TraceEvent(sortie.arrive_at_D, "UAV", dx, dy, "dock"))
    ev.sort(key=lambda e: e.clock_s)  # stable: ties keep insertion order
    return ev


def _advance(scenario: Scenario, state: State, action: int, rel: StepOutcome,
             reward_params: RewardParams, mask_fn) -> tuple[State, float, bool, StepOutcome]:
    outcome = rel.shifted(state.clock)
    visited = list(state.visited)
    for pid in outcome.visited:
        visited[pid] = True
    xy = tuple(float(v) for v in scenario.coords[action])
    nxt = State(xy, xy, tuple(visited), outcome.dock_time, state.step_index + 1,
                scenario.point_node[action], outcome.t_recharge)
    success = nxt.complete
    failure = not success and (nxt.step_index >= reward_params.steps_for(scenario)
                               or not mask_fn(nxt).any())
    r = compute_reward(outcome.t_route, outcome.t_recharge, outcome.t_uav_idle, outcome.t_ugv_idle,
                       success, failure, reward_params)
    return nxt, r, success or failure, outcome


def step(scenario: Scenario, state: State, action: int, reward_params: RewardParams = RewardParams(),
         config: PlannerConfig = PlannerConfig()) -> tuple[State, float, bool, StepOutcome]:
    """Deterministic transition for choosing rendezvous ``action``.

    Returns ``(next_state, reward, done, outcome)``.
    """
    if not (0 <= action < scenario.n_points) or not valid_action_mask(scenario, state, config)[action]:
        raise MaskedActionError(f"action {action} is masked")
    rel = _plan_relative(scenario, state, int(action), config)
    return _advance(scenario, state, int(action), rel, reward_params,
                    lambda s: valid_action_mask(scenario, s, config))


def encode_state(scenario: Scenario, state: State) -> np.ndarray:
    """Per-node rows ``[x_i, y_i, d_i, x_uav, y_uav, x_ugv, y_ugv]`` scaled to [0, 1]."""
    n = scenario.n_points
    out = np.empty((n, 7))
    out[:, 0:2] = scenario.normalize(scenario.coords)
    out[:, 2] = np.asarray(state.visited, dtype=float)
    out[:, 3:5] = scenario.normalize(np.asarray(state.uav_pos))
    out[:, 5:7] = scenario.normalize(np.asarray(state.ugv_pos))
    return out


class Env:
    """Scenario-bound environment with a shared transition cache.

    Transitions are deterministic, so the cache may be shared by any number
    of rollouts on the same scenario and configuration.
    """

    def __init__(self, scenario: Scenario, reward_params: RewardParams = RewardParams(),
                 config: PlannerConfig = PlannerConfig()):
        self.scenario = scenario
        self.reward_params = reward_params
        self.config = config
        self.cache: dict = {}
        self._mask_cache: dict = {}

    @property
    def max_steps(self) -> int:
        return self.reward_params.steps_for(self.scenario)

    def reset(self) -> State:
        return reset(self.scenario)

    def mask(self, state: State) -> np.ndarray:
        key = (state.ugv_node, state.pending_recharge, state.uav_pos)
        m = self._mask_cache.get(key)
        if m is None:
            m = valid_action_mask(self.scenario, state, self.config)
            self._mask_cache[key] = m
        return m.copy()

    def step(self, state: State, action: int) -> tuple[State, float, bool, StepOutcome]:
        action = int(action)
        if not (0 <= action < self.scenario.n_points) or not self.mask(state)[action]:
            raise MaskedActionError(f"action {action} is masked")
        key = (state.ugv_node, state.visited, state.pending_recharge, action)
        rel = self.cache.get(key)
        if rel is None:
            rel = _plan_relative(self.scenario, state, action, self.config)
            self.cache[key] = rel
        return _advance(self.scenario, state, action, rel, self.reward_params, self.mask)

    def encode(self, state: State) -> np.ndarray:
        return encode_state(self.scenario, state)


@dataclass
class Episode:
    actions: list[int] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    outcomes: list[StepOutcome] = field(default_factory=list)
    states: list[State] = field(default_factory=list)
    success: bool = False

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))

    def to_jsonl(self) -> str:
        """One JSON record per step."""
        lines = []
        for t, (a, r, o) in enumerate(zip(self.actions, self.rewards, self.outcomes)):
            lines.append(json.dumps({
                "step": t, "action": a, "reward": r,
                "t_route": o.t_route, "t_recharge": o.t_recharge,
                "t_uav_idle": o.t_uav_idle, "t_ugv_idle": o.t_ugv_idle,
                "takeoff_time": o.takeoff_time, "dock_time": o.dock_time,
                "visited": sorted(o.visited),
            }))
        return "\n".join(lines) + ("\n" if lines else "")
