"""World model: road graph, task points, vehicle constants.

Also holds scenario generation, JSON (de)serialization and road-graph
shortest paths.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .energy import (
    DEFAULT_RECHARGE_RATE,
    DEFAULT_UGV_IDLE_POWER,
    DEFAULT_UGV_TRAVEL_POWER,
    PowerProfile,
    flight_range,
)

SCHEMA_VERSION = 1
SNAP_TOLERANCE = 1.0  # m
EDGE_LENGTH_TOL = 1e-6  # m


class ScenarioError(ValueError):
    """A scenario violates one of its invariants."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class ScenarioParseError(ValueError):
    pass


class UnreachableError(ValueError):
    pass


@dataclass(frozen=True)
class TaskPoint:
    id: int
    x: float
    y: float
    on_road: bool


@dataclass(frozen=True, eq=False)
class RoadGraph:
    nodes: np.ndarray  # (m, 2) metres
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "edges", tuple((int(a), int(b), float(w)) for a, b, w in self.edges))

    @classmethod
    def from_points(cls, nodes, pairs) -> "RoadGraph":
        """Build a graph whose edge lengths are the Euclidean node distances."""
        nodes = np.asarray(nodes, dtype=float).reshape(-1, 2)
        edges = [(a, b, float(math.dist(nodes[a], nodes[b]))) for a, b in pairs]
        return cls(nodes, tuple(edges))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def adjacency(self) -> list[list[tuple[int, float]]]:
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n_nodes)]
        for a, b, w in self.edges:
            adj[a].append((b, w))
            adj[b].append((a, w))
        for nbrs in adj:
            nbrs.sort()
        return adj

    @cached_property
    def edge_length(self) -> dict[tuple[int, int], float]:
        out: dict[tuple[int, int], float] = {}
        for a, b, w in self.edges:
            # parallel edges: the shorter one is the one Dijkstra uses
            out[(a, b)] = out[(b, a)] = min(w, out.get((a, b), math.inf))
        return out

    @cached_property
    def components(self) -> np.ndarray:
        """Component label per node (label = smallest node index in it)."""
        label = np.full(self.n_nodes, -1, dtype=int)
        for root in range(self.n_nodes):
            if label[root] >= 0:
                continue
            label[root] = root
            stack = [root]
            while stack:
                u = stack.pop()
                for v, _ in self.adjacency[u]:
                    if label[v] < 0:
                        label[v] = root
                        stack.append(v)
        return label

    def connected(self, a: int, b: int) -> bool:
        return bool(self.components[a] == self.components[b])


@dataclass(frozen=True)
class VehicleParams:
    uav_speed: float = 10.0
    ugv_speed: float = 4.5
    fuel_capacity: float = 287_700.0
    recharge_rate: float = DEFAULT_RECHARGE_RATE
    ugv_travel_power: float = DEFAULT_UGV_TRAVEL_POWER
    ugv_idle_power: float = DEFAULT_UGV_IDLE_POWER
    power: PowerProfile = field(default_factory=PowerProfile)

    def validate(self) -> None:
        for name in ("uav_speed", "ugv_speed", "fuel_capacity", "recharge_rate",
                     "ugv_travel_power", "ugv_idle_power"):
            if not getattr(self, name) > 0:
                raise ScenarioError(f"params.{name}", "must be strictly positive")
        if not self.uav_speed > self.ugv_speed:
            raise ScenarioError("params.uav_speed", "must exceed ugv_speed")
        hi = 2 * self.uav_speed
        # Cubic has at most two interior extrema; dense sampling is enough here.
        vs = np.linspace(0.0, hi, 2001)
        p = self.power
        vals = ((p.c3 * vs + p.c2) * vs + p.c1) * vs + p.c0
        if not np.all(vals > 0):
            raise ScenarioError("params.power_profile", f"power must be positive on [0, {hi}] m/s")

    @property
    def uav_range(self) -> float:
        """Full-tank straight-line range at cruise speed (m)."""
        return flight_range(self.fuel_capacity, self.uav_speed, self.power)


@dataclass(frozen=True, eq=False)
class Scenario:
    task_points: tuple[TaskPoint, ...]
    road: RoadGraph
    depot: int
    params: VehicleParams
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax

    def __post_init__(self):
        object.__setattr__(self, "task_points", tuple(self.task_points))
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))
        self.validate()

    @property
    def n_points(self) -> int:
        return len(self.task_points)

    @cached_property
    def coords(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.task_points], dtype=float).reshape(-1, 2)

    @cached_property
    def point_node(self) -> dict[int, int]:
        """Road node of every on-road task point."""
        out = {}
        for p in self.task_points:
            if p.on_road:
                d = np.hypot(self.road.nodes[:, 0] - p.x, self.road.nodes[:, 1] - p.y)
                out[p.id] = int(np.argmin(d))
        return out

    @cached_property
    def node_points(self) -> dict[int, tuple[int, ...]]:
        """On-road task ids sitting on each road node."""
        acc: dict[int, list[int]] = {}
        for pid, node in self.point_node.items():
            acc.setdefault(node, []).append(pid)
        return {k: tuple(sorted(v)) for k, v in acc.items()}

    @cached_property
    def on_road_ids(self) -> tuple[int, ...]:
        return tuple(p.id for p in self.task_points if p.on_road)

    def node_xy(self, node: int) -> np.ndarray:
        return self.road.nodes[node]

    def normalize(self, xy: np.ndarray) -> np.ndarray:
        xmin, ymin, xmax, ymax = self.bounds
        xy = np.asarray(xy, dtype=float)
        return (xy - np.array([xmin, ymin])) / np.array([xmax - xmin, ymax - ymin])

    def validate(self) -> None:
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise ScenarioError("bounds", "must describe a non-empty rectangle")
        road = self.road
        if road.n_nodes == 0:
            raise ScenarioError("road.nodes", "road graph has no nodes")
        for k, (a, b, w) in enumerate(road.edges):
            if not (0 <= a < road.n_nodes and 0 <= b < road.n_nodes) or a == b:
                raise ScenarioError(f"road.edges[{k}]", "endpoints must be distinct valid node indices")
            if abs(w - math.dist(road.nodes[a], road.nodes[b])) > EDGE_LENGTH_TOL:
                raise ScenarioError(f"road.edges[{k}]", "length differs from Euclidean endpoint distance")
        if not (isinstance(self.depot, (int, np.integer)) and 0 <= self.depot < road.n_nodes):
            raise ScenarioError("depot", f"{self.depot} is not a valid road node index")
        ids = [p.id for p in self.task_points]
        if ids != list(range(len(ids))):
            raise ScenarioError("task_points", "ids must be 0..n-1 in order")
        if not ids:
            raise ScenarioError("task_points", "at least one task point required")
        for p in self.task_points:
            if not (xmin <= p.x <= xmax and ymin <= p.y <= ymax):
                raise ScenarioError(f"task_points[{p.id}]", "outside bounds")
            if p.on_road:
                d = np.hypot(road.nodes[:, 0] - p.x, road.nodes[:, 1] - p.y).min()
                if d > SNAP_TOLERANCE:
                    raise ScenarioError(f"task_points[{p.id}]", "on_road point not on a road node")
        if not any(p.on_road for p in self.task_points):
            raise ScenarioError("task_points", "no on_road task point; rendezvous impossible")
        self.params.validate()

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        pp = self.params
        return {
            "version": SCHEMA_VERSION,
            "bounds": list(self.bounds),
            "road": {
                "nodes": [[float(x), float(y)] for x, y in self.road.nodes],
                "edges": [[a, b, w] for a, b, w in self.road.edges],
            },
            "task_points": [
                {"id": p.id, "x": p.x, "y": p.y, "on_road": p.on_road} for p in self.task_points
            ],
            "depot": int(self.depot),
            "params": {
                "uav_speed": pp.uav_speed,
                "ugv_speed": pp.ugv_speed,
                "fuel_capacity": pp.fuel_capacity,
                "recharge_rate": pp.recharge_rate,
                "ugv_travel_power": pp.ugv_travel_power,
                "ugv_idle_power": pp.ugv_idle_power,
                "power_profile": pp.power.as_list(),
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        try:
            if d.get("version") != SCHEMA_VERSION:
                raise ScenarioError("version", f"unsupported schema version {d.get('version')!r}")
            road = d["road"]
            edges = []
            for k, e in enumerate(road["edges"]):
                if len(e) == 2:
                    a, b = e
                    w = math.dist(road["nodes"][a], road["nodes"][b])
                elif len(e) == 3:
                    a, b, w = e
                else:
                    raise ScenarioError(f"road.edges[{k}]", "expected [a, b] or [a, b, length]")
                edges.append((int(a), int(b), float(w)))
            pts = [
                TaskPoint(int(p["id"]), float(p["x"]), float(p["y"]), bool(p["on_road"]))
                for p in d["task_points"]
            ]
            raw = dict(d.get("params", {}))
            coeffs = raw.pop("power_profile", None)
            power = PowerProfile(*map(float, coeffs)) if coeffs is not None else PowerProfile()
            params = VehicleParams(**{k: float(v) for k, v in raw.items()}, power=power)
            depot = d["depot"]
            if not isinstance(depot, int):
                raise ScenarioError("depot", "must be an integer")
            return cls(tuple(pts), RoadGraph(road["nodes"], tuple(edges)), depot, params,
                       tuple(d["bounds"]))
        except ScenarioError:
            raise
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ScenarioParseError(f"malformed scenario: {exc!r}") from exc


def load_scenario(path) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioParseError(f"{path}: top level must be an object")
    return Scenario.from_dict(data)


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(scenario.dumps(), encoding="utf-8")


def generate_scenario(seed: int, n_points: int = 12, grid: int = 4, bounds: float = 20_000.0,
                      params: VehicleParams | None = None) -> Scenario:
    """Square grid road network with half the task points snapped onto road nodes.

    ``ceil(n_points / 2)`` on-road points take distinct non-depot nodes; the
    rest are drawn uniformly in the square and kept only if they sit farther
    than the snap tolerance from every road segment. The depot is node 0, the
    ``(0, 0)`` corner.
    """
    if n_points < 1 or grid < 2:
        raise ValueError("need n_points >= 1 and grid >= 2")
    n_on = math.ceil(n_points / 2)
    if n_on > grid * grid - 1:
        raise ValueError(f"{n_on} on-road points do not fit on a {grid}x{grid} grid")
    rng = np.random.Generator(np.random.Philox(seed))
    step = bounds / (grid - 1)
    nodes = [[c * step, r * step] for r in range(grid) for c in range(grid)]
    pairs = []
    for r in range(grid):
        for c in range(grid):
            i = r * grid + c
            if c + 1 < grid:
                pairs.append((i, i + 1))
            if r + 1 < grid:
                pairs.append((i, i + grid))
    road = RoadGraph.from_points(nodes, pairs)

    on_nodes = sorted(int(k) for k in rng.choice(np.arange(1, grid * grid), size=n_on, replace=False))
    pts = [TaskPoint(i, float(nodes[k][0]), float(nodes[k][1]), True) for i, k in enumerate(on_nodes)]
    while len(pts) < n_points:
        x, y = np.round(rng.uniform(0.0, bounds, size=2), 3)
        # grid roads are the lines x = c*step and y = r*step
        off_x = abs(x - step * round(x / step))
        off_y = abs(y - step * round(y / step))
        if min(off_x, off_y) <= SNAP_TOLERANCE:
            continue
        pts.append(TaskPoint(len(pts), float(x), float(y), False))
    return Scenario(tuple(pts), road, 0, params or VehicleParams(), (0.0, 0.0, bounds, bounds))


def shortest_road_path(road: RoadGraph, a: int, b: int) -> tuple[list[int], float]:
    """Dijkstra from ``a`` to ``b``.

    Among equal-length shortest paths each node keeps the predecessor with the
    smallest index, so the returned route is reproducible.
    """
    n = road.n_nodes
    if not (0 <= a < n and 0 <= b < n):
        raise IndexError(f"node index out of range: {a}, {b}")
    if a == b:
        return [a], 0.0
    dist = [math.inf] * n
    pred = [-1] * n
    done = [False] * n
    dist[a] = 0.0
    heap = [(0.0, a)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == b:
            break
        for v, w in road.adjacency[u]:
            if done[v]:
                continue
            nd = d + w
            if nd < dist[v] - 1e-9:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
            elif abs(nd - dist[v]) <= 1e-9 and u < pred[v]:
                pred[v] = u
    if not done[b]:
        raise UnreachableError(f"road node {b} unreachable from {a}")
    path = [b]
    while path[-1] != a:
        path.append(pred[path[-1]])
    path.reverse()
    # re-sum along the chosen path so the distance matches the waypoints exactly
    total = 0.0
    for u, v in zip(path, path[1:]):
        total += road.edge_length[(u, v)]
    return path, total


def travel_time(distance: float, speed: float) -> float:
    if distance < 0 or speed <= 0:
        raise ValueError("need distance >= 0 and speed > 0")
    return distance / speed
