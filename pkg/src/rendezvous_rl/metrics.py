"""Mission metrics, evaluation runs and the side-by-side comparison tables."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .baseline_ga import ga_rollout
from .energy import hover_power, uav_power, ugv_energy
from .env import Env, Episode
from .planners import TraceEvent, write_trace
from .policy import PolicyParams
from .scenario import Scenario
from .training import rollout


@dataclass(frozen=True)
class MissionMetrics:
    total_time: float  # min
    points_dropped: int
    uav_travel: float  # min
    uav_hover: float  # min
    uav_hover_energy: float  # kJ
    uav_total_energy: float  # kJ
    ugv_travel: float  # min
    ugv_wait: float  # min
    ugv_wait_energy: float  # kJ
    ugv_total_energy: float  # kJ
    n_recharges: int
    recharge_time: float  # min
    uav_idle_pct: float
    ugv_idle_pct: float
    success: bool = True
    steps: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _pct(part: float, whole: float) -> float:
    return 100.0 * part / whole if whole > 0 else 0.0


def mission_metrics(scenario: Scenario, episode: Episode) -> MissionMetrics:
    """Aggregate an episode. Total time runs until the last recharge ends."""
    p = scenario.params
    route = sum(o.t_route for o in episode.outcomes)
    hover = sum(o.t_uav_idle for o in episode.outcomes)
    recharge = sum(o.t_recharge for o in episode.outcomes)
    drive = sum(o.ugv_travel for o in episode.outcomes)
    wait = sum(o.t_ugv_idle for o in episode.outcomes)
    total = route + hover + recharge
    final = episode.states[-1] if episode.states else None
    dropped = (scenario.n_points - final.n_visited) if final is not None else scenario.n_points
    return MissionMetrics(
        total_time=total / 60.0,
        points_dropped=int(dropped),
        uav_travel=route / 60.0,
        uav_hover=hover / 60.0,
        uav_hover_energy=hover_power(p.power) * hover / 1000.0,
        uav_total_energy=(uav_power(p.uav_speed, p.power) * route + hover_power(p.power) * hover) / 1000.0,
        ugv_travel=drive / 60.0,
        ugv_wait=wait / 60.0,
        ugv_wait_energy=p.ugv_idle_power * wait / 1000.0,
        ugv_total_energy=ugv_energy(drive, wait, p) / 1000.0,
        n_recharges=sum(1 for o in episode.outcomes if o.t_recharge > 0),
        recharge_time=recharge / 60.0,
        uav_idle_pct=_pct(hover, total),
        ugv_idle_pct=_pct(wait, total),
        success=bool(episode.success),
        steps=len(episode.outcomes),
    )


def episode_trace(episode: Episode) -> list[TraceEvent]:
    return [e for o in episode.outcomes for e in o.events]


def run_eval(scenario: Scenario | Env, solution, mode: str = "greedy", seed: int = 0):
    """Run one mission from a policy or a GA chromosome.

    Returns ``(metrics, trace, episode)``; a failed mission is reported
    through ``metrics.success`` and ``points_dropped``.
    """
    env = scenario if isinstance(scenario, Env) else Env(scenario)
    if isinstance(solution, PolicyParams):
        rng = np.random.Generator(np.random.Philox(seed)) if mode == "sample" else None
        episode = rollout(env, solution, rng, mode).episode
    else:
        episode = ga_rollout(env, tuple(int(g) for g in solution))
    return mission_metrics(env.scenario, episode), episode_trace(episode), episode


def export_route_trace(trace, path) -> None:
    write_trace(trace, path)


ROUTING_ROWS = (
    ("Total task completion time (min)", "total_time", ".2f"),
    ("Mission points dropped", "points_dropped", "d"),
    ("UAV travel time (min)", "uav_travel", ".2f"),
    ("UAV hover time (min)", "uav_hover", ".2f"),
    ("UAV hover energy (kJ)", "uav_hover_energy", ".2f"),
    ("UAV total energy (kJ)", "uav_total_energy", ".2f"),
    ("UGV travel time (min)", "ugv_travel", ".2f"),
    ("UGV wait time (min)", "ugv_wait", ".2f"),
    ("UGV wait energy (kJ)", "ugv_wait_energy", ".2f"),
    ("UGV total energy (kJ)", "ugv_total_energy", ".2f"),
)
RENDEZVOUS_ROWS = (
    ("No. of recharge stops", "n_recharges", "d"),
    ("Recharge time (min)", "recharge_time", ".2f"),
    ("UAV idle time (%)", "uav_idle_pct", ".2f"),
    ("UGV idle time (%)", "ugv_idle_pct", ".2f"),
)


def _table(title: str, rows, left: MissionMetrics, right: MissionMetrics, names) -> str:
    cells = [(label, format(getattr(left, key), fmt), format(getattr(right, key), fmt))
             for label, key, fmt in rows]
    w0 = max(len(title), *(len(c[0]) for c in cells))
    w1 = max(len(names[0]), *(len(c[1]) for c in cells))
    w2 = max(len(names[1]), *(len(c[2]) for c in cells))
    lines = [f"{title:<{w0}}  {names[0]:>{w1}}  {names[1]:>{w2}}", "-" * (w0 + w1 + w2 + 4)]
    lines += [f"{a:<{w0}}  {b:>{w1}}  {c:>{w2}}" for a, b, c in cells]
    return "\n".join(lines)


def metrics_table(m: MissionMetrics, name: str = "value") -> str:
    """Aligned single-column rendering of every table row."""
    rows = ROUTING_ROWS + RENDEZVOUS_ROWS
    cells = [(label, format(getattr(m, key), fmt)) for label, key, fmt in rows]
    w0 = max(len(c[0]) for c in cells)
    w1 = max(len(name), *(len(c[1]) for c in cells))
    lines = [f"{'metric':<{w0}}  {name:>{w1}}"] + [f"{a:<{w0}}  {b:>{w1}}" for a, b in cells]
    return "\n".join(lines) + "\n"


def compare_report(rl: MissionMetrics, ga: MissionMetrics, names=("DRL", "GA")) -> str:
    """Routing (10 rows) and rendezvous (4 rows) tables; pure formatting."""
    return (_table("Routing metric", ROUTING_ROWS, rl, ga, names) + "\n\n"
            + _table("Rendezvous metric", RENDEZVOUS_ROWS, rl, ga, names) + "\n")
