"""'UGV first, UAV second' planning for one rendezvous.

The UGV drives the shortest road path to the chosen stop. Its arrival opens
the time window of the UAV sortie, which is solved as an E-VRPTW instance.
Recharge time is converted into a ride along the UGV's next path with the UAV
docked. The ride runs at the start of the following step, because that is
when the next stop (and therefore the path) becomes known.
"""
from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .energy import uav_power
from .evrptw import (
    EvrptwInstance,
    EvrptwSolution,
    TabuParams,
    construct_initial,
    tabu_search,
)
from .scenario import Scenario, shortest_road_path, travel_time

DEFAULT_WINDOW = 1800.0  # s, width of the rendezvous window

TRACE_FIELDS = ("clock_s", "agent", "x_m", "y_m", "event", "task_id")
TRACE_EVENTS = frozenset({"move", "hover", "wait", "dock", "takeoff", "visit"})


@dataclass(frozen=True)
class TraceEvent:
    clock_s: float
    agent: str  # "UAV" | "UGV"
    x_m: float
    y_m: float
    event: str
    task_id: int | None = None

    def shifted(self, dt: float) -> "TraceEvent":
        return TraceEvent(self.clock_s + dt, self.agent, self.x_m, self.y_m, self.event, self.task_id)


@dataclass(frozen=True)
class UGVLeg:
    waypoints: tuple[int, ...]
    depart: float
    arrive: float
    distance: float
    visited_points: tuple[int, ...]  # on-road ids along the path, in path order
    cum_dist: tuple[float, ...] = ()  # distance from the start at each waypoint

    def point_distance(self, scenario: Scenario, pid: int) -> float:
        return self.cum_dist[self.waypoints.index(scenario.point_node[pid])]


@dataclass(frozen=True)
class UAVSortie:
    route: tuple[int, ...]  # task ids flown between S and D
    depart: float
    arrive_at_D: float  # docking time, after any hover
    hover: float
    fuel_at_D: float  # on arrival, before hovering
    visited_points: tuple[int, ...]
    start_xy: tuple[float, float] = (0.0, 0.0)
    stop: int = -1
    instance: EvrptwInstance | None = field(default=None, compare=False, repr=False)
    solution: EvrptwSolution | None = field(default=None, compare=False, repr=False)

    @property
    def raw_arrival(self) -> float:
        return self.arrive_at_D - self.hover

    @property
    def flight_time(self) -> float:
        return self.raw_arrival - self.depart


@dataclass(frozen=True)
class StepOutcome:
    t_route: float  # UAV flight time, s
    t_recharge: float
    t_uav_idle: float  # hover at the stop
    t_ugv_idle: float  # UGV waiting at the stop
    takeoff_pos: tuple[float, float]  # where this step's sortie started
    takeoff_time: float
    visited: frozenset[int]
    stop: int = -1
    dock_time: float = 0.0
    ugv_travel: float = 0.0  # s driven this step
    ugv_distance: float = 0.0
    fuel_at_dock: float = 0.0
    ride_visited: tuple[int, ...] = ()
    leg_visited: tuple[int, ...] = ()
    sortie_visited: tuple[int, ...] = ()
    events: tuple[TraceEvent, ...] = ()

    @property
    def ready_time(self) -> float:
        """End of the recharge that follows docking (next takeoff instant)."""
        return self.dock_time + self.t_recharge

    @property
    def time_terms(self) -> float:
        return self.t_route + self.t_recharge + self.t_uav_idle + self.t_ugv_idle

    def shifted(self, dt: float) -> "StepOutcome":
        from dataclasses import replace
        return replace(self, takeoff_time=self.takeoff_time + dt, dock_time=self.dock_time + dt,
                       events=tuple(e.shifted(dt) for e in self.events))


def _cumulative(scenario: Scenario, path: list[int]) -> list[float]:
    cum = [0.0]
    for u, v in zip(path, path[1:]):
        cum.append(cum[-1] + scenario.road.edge_length[(u, v)])
    return cum


def _points_on_path(scenario: Scenario, path) -> tuple[int, ...]:
    out: list[int] = []
    for node in path:
        out.extend(scenario.node_points.get(node, ()))
    return tuple(out)


def plan_ugv_leg(scenario: Scenario, ugv_pos: int, stop: int, depart: float) -> UGVLeg:
    """UGV leg from road node ``ugv_pos`` to on-road task point ``stop``."""
    if stop not in scenario.point_node:
        raise ValueError(f"task point {stop} is not on the road")
    path, dist = shortest_road_path(scenario.road, ugv_pos, scenario.point_node[stop])
    arrive = depart + travel_time(dist, scenario.params.ugv_speed)
    return UGVLeg(tuple(path), depart, arrive, dist, _points_on_path(scenario, path),
                  tuple(_cumulative(scenario, path)))


def _along(scenario: Scenario, path, cum, d: float) -> tuple[float, float]:
    nodes = scenario.road.nodes
    if d >= cum[-1]:
        x, y = nodes[path[-1]]
        return float(x), float(y)
    i = bisect.bisect_right(cum, d) - 1
    a, b = nodes[path[i]], nodes[path[i + 1]]
    frac = (d - cum[i]) / (cum[i + 1] - cum[i])
    return float(a[0] + frac * (b[0] - a[0])), float(a[1] + frac * (b[1] - a[1]))


def project_recharge(scenario: Scenario, stop: int, t_r: float, next_stop: int | None,
                     *, from_node: int | None = None) -> tuple[tuple[float, float], tuple[int, ...]]:
    """Carry the docked UAV ``ugv_speed * t_r`` metres toward ``next_stop``.

    Returns the takeoff point and the on-road task ids passed on the way
    (the starting node included). ``from_node`` overrides the road node of
    ``stop``, e.g. for the depot.
    """
    if t_r < 0:
        raise ValueError("recharge time must be non-negative")
    start = scenario.point_node[stop] if from_node is None else from_node
    if next_stop is None or t_r == 0:
        x, y = scenario.road.nodes[start]
        return (float(x), float(y)), ()
    path, _ = shortest_road_path(scenario.road, start, scenario.point_node[next_stop])
    cum = _cumulative(scenario, path)
    ride = min(scenario.params.ugv_speed * t_r, cum[-1])
    passed = [pid for node, c in zip(path, cum) if c <= ride
              for pid in scenario.node_points.get(node, ())]
    return _along(scenario, path, cum, ride), tuple(passed)


def sortie_instance(scenario: Scenario, start_xy, stop: int, candidates, window: tuple[float, float],
                    depart: float, drop_penalty: float) -> EvrptwInstance:
    p = scenario.params
    cand = sorted(candidates)
    return EvrptwInstance(
        np.asarray(start_xy, dtype=float),
        scenario.coords[stop],
        scenario.coords[cand] if cand else np.zeros((0, 2)),
        t_start=window[0],
        t_end=window[1],
        speed=p.uav_speed,
        fuel_capacity=p.fuel_capacity,
        burn_rate=uav_power(p.uav_speed, p.power),
        drop_penalty=drop_penalty,
        clock0=depart,
        candidate_ids=tuple(cand),
    )


def plan_uav_sortie(scenario: Scenario, start_xy, stop: int, candidates, window: tuple[float, float],
                    depart: float, drop_penalty: float = 10_000.0,
                    tabu: TabuParams = TabuParams()) -> UAVSortie:
    """Route the UAV from ``start_xy`` to ``stop`` over the given unvisited task ids."""
    inst = sortie_instance(scenario, start_xy, stop, candidates, window, depart, drop_penalty)
    sol = tabu_search(inst, construct_initial(inst), tabu)
    dock = sol.arrival[-1]
    # same recursion as the solution's arrival times, so hover is exactly 0 when unclamped
    raw = sol.arrival[-2] + inst.arc_time[sol.route[-2], sol.route[-1]]
    visited = sol.visited_ids(inst)
    return UAVSortie(route=visited, depart=depart, arrive_at_D=dock, hover=max(0.0, dock - raw),
                     fuel_at_D=sol.fuel_at[-1], visited_points=visited,
                     start_xy=(float(start_xy[0]), float(start_xy[1])), stop=stop,
                     instance=inst, solution=sol)


def assemble_step(ugv_leg: UGVLeg, sortie: UAVSortie, recharge_t: float, *,
                  ride_visited=(), leg_visited=None, fuel_at_dock: float | None = None,
                  scenario: Scenario | None = None) -> StepOutcome:
    """Combine a UGV leg and a UAV sortie that meet at the same stop.

    The UGV counts as busy until the UAV takes off (it is recharging it), so
    its idle time runs from ``max(leg arrival, takeoff)`` to docking.
    """
    if scenario is not None and ugv_leg.waypoints[-1] != scenario.point_node[sortie.stop]:
        raise ValueError("UGV leg and UAV sortie end at different stops")
    ugv_ready = max(ugv_leg.arrive, sortie.depart)
    t_ugv_idle = max(0.0, sortie.arrive_at_D - ugv_ready)
    leg_visited = tuple(ugv_leg.visited_points) if leg_visited is None else tuple(leg_visited)
    visited = frozenset(ride_visited) | frozenset(leg_visited) | frozenset(sortie.visited_points)
    return StepOutcome(
        t_route=sortie.flight_time,
        t_recharge=recharge_t,
        t_uav_idle=sortie.hover,
        t_ugv_idle=t_ugv_idle,
        takeoff_pos=sortie.start_xy,
        takeoff_time=sortie.depart,
        visited=visited,
        stop=sortie.stop,
        dock_time=sortie.arrive_at_D,
        ugv_travel=ugv_leg.arrive - ugv_leg.depart,
        ugv_distance=ugv_leg.distance,
        fuel_at_dock=sortie.fuel_at_D if fuel_at_dock is None else fuel_at_dock,
        ride_visited=tuple(ride_visited),
        leg_visited=leg_visited,
        sortie_visited=tuple(sortie.visited_points),
    )


def write_trace(events, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_FIELDS)
        for e in events:
            w.writerow([repr(float(e.clock_s)), e.agent, repr(float(e.x_m)), repr(float(e.y_m)),
                        e.event, "" if e.task_id is None else e.task_id])


def read_trace(path) -> list[TraceEvent]:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != TRACE_FIELDS:
            raise ValueError(f"unexpected trace header {header}")
        out = []
        for row in r:
            t, agent, x, y, ev, tid = row
            if ev not in TRACE_EVENTS or agent not in ("UAV", "UGV"):
                raise ValueError(f"bad trace row {row}")
            out.append(TraceEvent(float(t), agent, float(x), float(y), ev, int(tid) if tid else None))
        return out


def trace_uav_energy(events, uav_speed: float, power) -> tuple[float, float, float]:
    """Replay UAV rows: returns (flight seconds, hover seconds, joules)."""
    rows = [e for e in events if e.agent == "UAV"]
    flight = hover = 0.0
    for a, b in zip(rows, rows[1:]):
        dt = b.clock_s - a.clock_s
        if a.event in ("takeoff", "visit", "move"):
            flight += dt
        elif a.event == "hover":
            hover += dt
    energy = uav_power(uav_speed, power) * flight + uav_power(0.0, power) * hover
    return flight, hover, energy


def trace_distance_check(events, uav_speed: float) -> float:
    """Largest |time - distance/speed| mismatch over UAV flight segments."""
    rows = [e for e in events if e.agent == "UAV"]
    worst = 0.0
    for a, b in zip(rows, rows[1:]):
        if a.event in ("takeoff", "visit", "move"):
            d = math.hypot(b.x_m - a.x_m, b.y_m - a.y_m)
            worst = max(worst, abs((b.clock_s - a.clock_s) - d / uav_speed))
    return worst
