"""One UAV sortie as an energy-constrained routing problem with a time window.

Vertices are numbered ``0`` (takeoff point S), ``1..k`` (candidate task
points) and ``k + 1`` (refuel stop D). A solution is a simple path from S to D;
candidates off the path are dropped at ``drop_penalty`` seconds each.

Fuel only decreases between S and D and the window only bounds the arrival at
D, so a route is feasible exactly when its travel time fits
:attr:`EvrptwInstance.travel_budget`. The solvers use that shortcut;
:func:`check_feasibility` re-derives the full fuel and arrival recursions.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .energy import DEFAULT_PROFILE, uav_power

DEFAULT_DROP_PENALTY = 10_000.0
MAX_ORACLE_CANDIDATES = 9
FUEL_TOL = 1e-6  # J
TIME_TOL = 1e-6  # s
_EPS = 1e-9


class InfeasibleSortieError(RuntimeError):
    """Even the direct S -> D flight breaks the fuel or window limits."""


class TooLargeError(ValueError):
    pass


class MalformedRouteError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EvrptwInstance:
    start: np.ndarray  # (2,) metres
    terminal: np.ndarray  # (2,)
    candidates: np.ndarray  # (k, 2)
    t_start: float
    t_end: float
    speed: float = 10.0
    fuel_capacity: float = 287_700.0
    burn_rate: float = field(default_factory=lambda: uav_power(10.0, DEFAULT_PROFILE))
    drop_penalty: float = DEFAULT_DROP_PENALTY
    clock0: float = 0.0
    start_fuel: float | None = None  # defaults to a full tank
    candidate_ids: tuple[int, ...] | None = None  # task ids, for reporting

    def __post_init__(self):
        object.__setattr__(self, "start", np.asarray(self.start, dtype=float).reshape(2))
        object.__setattr__(self, "terminal", np.asarray(self.terminal, dtype=float).reshape(2))
        object.__setattr__(self, "candidates", np.asarray(self.candidates, dtype=float).reshape(-1, 2))
        if self.candidate_ids is None:
            object.__setattr__(self, "candidate_ids", tuple(range(len(self.candidates))))
        else:
            object.__setattr__(self, "candidate_ids", tuple(int(i) for i in self.candidate_ids))
        if len(self.candidate_ids) != len(self.candidates):
            raise ValueError("candidate_ids length mismatch")
        if self.t_start > self.t_end:
            raise ValueError(f"window start {self.t_start} after end {self.t_end}")
        if self.start_fuel is None:
            object.__setattr__(self, "start_fuel", float(self.fuel_capacity))

    @property
    def k(self) -> int:
        return len(self.candidates)

    @property
    def depot_vertex(self) -> int:
        return self.k + 1

    @cached_property
    def points(self) -> np.ndarray:
        return np.vstack([self.start[None], self.candidates, self.terminal[None]])

    @cached_property
    def arc_time(self) -> np.ndarray:
        p = self.points
        d = np.hypot(p[:, None, 0] - p[None, :, 0], p[:, None, 1] - p[None, :, 1])
        return d / self.speed

    @cached_property
    def _arcs(self) -> list[list[float]]:
        return self.arc_time.tolist()

    @property
    def travel_budget(self) -> float:
        """Longest S -> D travel time satisfying both fuel and window end."""
        return min(self.start_fuel / self.burn_rate, self.t_end - self.clock0)

    def route_time(self, inner) -> float:
        T = self._arcs
        prev, total = 0, 0.0
        for v in inner:
            total += T[prev][v]
            prev = v
        return total + T[prev][self.k + 1]

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "start": self.start.tolist(),
            "terminal": self.terminal.tolist(),
            "candidates": self.candidates.tolist(),
            "candidate_ids": list(self.candidate_ids),
            "t_start": self.t_start,
            "t_end": self.t_end,
            "speed": self.speed,
            "fuel_capacity": self.fuel_capacity,
            "burn_rate": self.burn_rate,
            "drop_penalty": self.drop_penalty,
            "clock0": self.clock0,
            "start_fuel": self.start_fuel,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvrptwInstance":
        d = dict(d)
        if d.pop("version", 1) != 1:
            raise ValueError("unsupported instance version")
        return cls(**d)


@dataclass(frozen=True)
class EvrptwSolution:
    route: tuple[int, ...]  # vertex ids, S=0 ... D=k+1
    visited: tuple[bool, ...]  # per candidate
    arrival: tuple[float, ...]  # per routed vertex; D is clamped up to t_start
    fuel_at: tuple[float, ...]  # per routed vertex, on arrival

    @property
    def inner(self) -> tuple[int, ...]:
        return self.route[1:-1]

    def visited_ids(self, instance: EvrptwInstance) -> tuple[int, ...]:
        return tuple(instance.candidate_ids[v - 1] for v in self.inner)

    def to_dict(self) -> dict:
        return {"route": list(self.route), "visited": list(self.visited),
                "arrival": list(self.arrival), "fuel_at": list(self.fuel_at)}

    @classmethod
    def from_dict(cls, d: dict) -> "EvrptwSolution":
        return cls(tuple(d["route"]), tuple(d["visited"]), tuple(d["arrival"]), tuple(d["fuel_at"]))


def make_solution(instance: EvrptwInstance, inner) -> EvrptwSolution:
    """Time and fuel a route by the arrival and fuel recursions."""
    T = instance._arcs
    route = (0, *inner, instance.k + 1)
    t, f = instance.clock0, instance.start_fuel
    arrival, fuel = [t], [f]
    for i, j in zip(route, route[1:]):
        t = t + T[i][j]
        f = f - instance.burn_rate * T[i][j]
        arrival.append(t)
        fuel.append(f)
    arrival[-1] = max(arrival[-1], instance.t_start)
    visited = [False] * instance.k
    for v in inner:
        visited[v - 1] = True
    return EvrptwSolution(route, tuple(visited), tuple(arrival), tuple(fuel))


def raw_arrival(instance: EvrptwInstance, solution: EvrptwSolution) -> float:
    """Arrival at D before any hovering."""
    return instance.clock0 + instance.route_time(solution.inner)


def evrptw_cost(instance: EvrptwInstance, solution: EvrptwSolution) -> float:
    route = solution.route
    if len(route) < 2 or route[0] != 0 or route[-1] != instance.k + 1:
        raise MalformedRouteError(f"route must run from 0 to {instance.k + 1}: {route}")
    dropped = instance.k - (len(route) - 2)
    return instance.route_time(route[1:-1]) + instance.drop_penalty * dropped


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def check_feasibility(instance: EvrptwInstance, solution: EvrptwSolution) -> FeasibilityReport:
    out: list[str] = []
    route = solution.route
    k, D = instance.k, instance.k + 1
    T = instance._arcs
    if len(route) < 2 or route[0] != 0 or route[-1] != D:
        return FeasibilityReport(("malformed_route",))
    if len(set(route)) != len(route):
        out.append("repeated_vertex")
    if any(not 1 <= v <= k for v in route[1:-1]):
        out.append("unknown_vertex")
        return FeasibilityReport(tuple(out))
    if len(solution.visited) != k or any(solution.visited[v - 1] != (v in route[1:-1]) for v in range(1, k + 1)):
        out.append("visited_mismatch")
    if len(solution.arrival) != len(route) or len(solution.fuel_at) != len(route):
        out.append("length_mismatch")
        return FeasibilityReport(tuple(out))

    if abs(solution.fuel_at[0] - instance.start_fuel) > FUEL_TOL:
        out.append("fuel_start_mismatch")
    if abs(solution.arrival[0] - instance.clock0) > TIME_TOL:
        out.append("departure_mismatch")
    for pos in range(1, len(route)):
        i, j = route[pos - 1], route[pos]
        f_expect = solution.fuel_at[pos - 1] - instance.burn_rate * T[i][j]
        if abs(solution.fuel_at[pos] - f_expect) > FUEL_TOL:
            out.append(f"fuel_recursion at vertex {j}")
        if solution.fuel_at[pos] < -FUEL_TOL:
            out.append(f"fuel_underflow at vertex {j}")
        if solution.fuel_at[pos] > instance.fuel_capacity + FUEL_TOL:
            out.append(f"fuel_overflow at vertex {j}")
        t_expect = solution.arrival[pos - 1] + T[i][j]
        if j == D:
            # hovering is allowed only at the refuel stop, and only until it opens
            t_expect = max(t_expect, instance.t_start)
        if abs(solution.arrival[pos] - t_expect) > TIME_TOL:
            out.append(f"arrival_recursion at vertex {j}")
    t_D = solution.arrival[-1]
    if t_D > instance.t_end + TIME_TOL:
        out.append("window_overrun")
    if t_D < instance.t_start - TIME_TOL:
        out.append("window_early")
    return FeasibilityReport(tuple(out))


def construct_initial(instance: EvrptwInstance) -> EvrptwSolution:
    """Greedy nearest-feasible append, then close the route at D."""
    T = instance._arcs
    D = instance.k + 1
    budget = instance.travel_budget + _EPS
    if T[0][D] > budget:
        raise InfeasibleSortieError(
            f"direct flight needs {T[0][D]:.3f} s but only {instance.travel_budget:.3f} s available")
    route: list[int] = []
    used = 0.0
    last = 0
    remaining = set(range(1, instance.k + 1))
    while remaining:
        for c in sorted(remaining, key=lambda c: (T[last][c], c)):
            if used + T[last][c] + T[c][D] <= budget:
                used += T[last][c]
                route.append(c)
                remaining.discard(c)
                last = c
                break
        else:
            break
    return make_solution(instance, route)


@dataclass(frozen=True)
class TabuParams:
    iters: int = 500
    tenure: int = 7
    seed: int = 0
    restart_after: int = 60  # iterations without a new incumbent before diversifying


def _random_insertion(T, usable, D, budget, rng) -> list[int]:
    """Cheapest feasible insertion of the usable candidates in a random order."""
    route: list[int] = []
    length = T[0][D]
    for c in rng.permutation(usable).tolist():
        seq = [0, *route, D]
        q_best, d_best = -1, math.inf
        for q in range(len(seq) - 1):
            a, b = seq[q], seq[q + 1]
            d = T[a][c] + T[c][b] - T[a][b]
            if d < d_best - _EPS:
                q_best, d_best = q, d
        if length + d_best <= budget:
            route.insert(q_best, c)
            length += d_best
    return route


def tabu_search(instance: EvrptwInstance, init: EvrptwSolution,
                params: TabuParams = TabuParams()) -> EvrptwSolution:
    """Tabu search over relocate / swap / toggle moves.

    Each iteration scans moves in candidate-id order and takes the first one
    that improves the current cost; otherwise the best admissible move (ties
    broken by the seeded generator). A move is tabu while any candidate it
    touches is within ``tenure`` iterations of its last move, unless it would
    beat the incumbent. After ``restart_after`` iterations without a new
    incumbent the search restarts from a randomized insertion build.
    """
    T = instance._arcs
    k, D = instance.k, instance.k + 1
    P = instance.drop_penalty
    budget = instance.travel_budget + _EPS
    usable = [c for c in range(1, k + 1) if T[0][c] + T[c][D] <= budget]
    rng = np.random.Generator(np.random.Philox(params.seed))

    route = list(init.inner)
    cur_len = instance.route_time(route)
    cur_cost = cur_len + P * (k - len(route))
    best_cost, best_route = cur_cost, list(route)
    tabu_until = [-1] * (k + 2)
    last_gain = 0

    for it in range(params.iters):
        if it - last_gain >= params.restart_after and usable:
            route = _random_insertion(T, usable, D, budget, rng)
            cur_len = instance.route_time(route)
            cur_cost = cur_len + P * (k - len(route))
            tabu_until = [-1] * (k + 2)
            last_gain = it
            if cur_cost < best_cost - _EPS:
                best_cost, best_route = cur_cost, list(route)
        seq = [0, *route, D]
        pos = {v: p for p, v in enumerate(seq)}
        first = None
        best_moves: list = []
        best_move_cost = math.inf

        def consider(new_len, drops, moved, make):
            nonlocal first, best_move_cost, best_moves
            if new_len > budget:
                return False
            cost = new_len + P * drops
            if any(tabu_until[c] > it for c in moved) and not cost < best_cost - _EPS:
                return False
            if cost < cur_cost - _EPS:
                first = (cost, new_len, moved, make)
                return True
            if cost < best_move_cost - _EPS:
                best_move_cost, best_moves = cost, [(cost, new_len, moved, make)]
            elif cost <= best_move_cost + _EPS:
                best_moves.append((cost, new_len, moved, make))
            return False

        drops = k - len(route)
        found = False
        # toggle: drop an included candidate or insert a dropped one at its cheapest slot
        for c in usable:
            if c in pos:
                p = pos[c]
                a, b = seq[p - 1], seq[p + 1]
                delta = T[a][b] - T[a][c] - T[c][b]
                found = consider(cur_len + delta, drops + 1, (c,),
                                 lambda p=p: route[:p - 1] + route[p:])
            else:
                q_best, d_best = 0, math.inf
                for q in range(len(seq) - 1):
                    a, b = seq[q], seq[q + 1]
                    d = T[a][c] + T[c][b] - T[a][b]
                    if d < d_best - _EPS:
                        q_best, d_best = q, d
                found = consider(cur_len + d_best, drops - 1, (c,),
                                 lambda q=q_best, c=c: route[:q] + [c] + route[q:])
            if found:
                break
        # relocate one routed candidate
        if not found:
            for c in sorted(route):
                p = pos[c]
                reduced = seq[:p] + seq[p + 1:]
                a, b = seq[p - 1], seq[p + 1]
                base = cur_len + T[a][b] - T[a][c] - T[c][b]
                for q in range(len(reduced) - 1):
                    if q == p - 1:
                        continue
                    x, y = reduced[q], reduced[q + 1]
                    new_len = base + T[x][c] + T[c][y] - T[x][y]
                    inner_reduced = reduced[1:-1]
                    found = consider(new_len, drops, (c,),
                                     lambda q=q, ir=inner_reduced, c=c: ir[:q] + [c] + ir[q:])
                    if found:
                        break
                if found:
                    break
        # swap two candidates: exchange positions, or replace a routed one by a dropped one
        if not found:
            for c1, c2 in itertools.combinations(usable, 2):
                in1, in2 = c1 in pos, c2 in pos
                if in1 and in2:
                    p1, p2 = pos[c1], pos[c2]
                    edges = {p1 - 1, p1, p2 - 1, p2}
                    old = sum(T[seq[e]][seq[e + 1]] for e in edges)
                    s2 = list(seq)
                    s2[p1], s2[p2] = s2[p2], s2[p1]
                    new = sum(T[s2[e]][s2[e + 1]] for e in edges)
                    found = consider(cur_len - old + new, drops, (c1, c2),
                                     lambda s2=s2: s2[1:-1])
                elif in1 != in2:
                    cin, cout = (c1, c2) if in1 else (c2, c1)
                    p = pos[cin]
                    reduced = seq[:p] + seq[p + 1:]
                    a, b = seq[p - 1], seq[p + 1]
                    base = cur_len + T[a][b] - T[a][cin] - T[cin][b]
                    q_best, d_best = 0, math.inf
                    for q in range(len(reduced) - 1):
                        x, y = reduced[q], reduced[q + 1]
                        d = T[x][cout] + T[cout][y] - T[x][y]
                        if d < d_best - _EPS:
                            q_best, d_best = q, d
                    found = consider(base + d_best, drops, (c1, c2),
                                     lambda q=q_best, ir=reduced[1:-1], c=cout: ir[:q] + [c] + ir[q:])
                if found:
                    break

        if first is not None:
            chosen = first
        elif best_moves:
            chosen = best_moves[int(rng.integers(len(best_moves)))] if len(best_moves) > 1 else best_moves[0]
        else:
            continue  # everything tabu; wait for tenures to lapse
        _, _, moved, make = chosen
        route = make()
        cur_len = instance.route_time(route)  # resync to avoid delta drift
        cur_cost = cur_len + P * (k - len(route))
        for c in moved:
            tabu_until[c] = it + 1 + params.tenure
        if cur_cost < best_cost - _EPS:
            best_cost, best_route = cur_cost, list(route)
            last_gain = it

    return make_solution(instance, best_route)


def brute_force_oracle(instance: EvrptwInstance) -> EvrptwSolution:
    """Exhaustive search over every subset and ordering of the candidates.

    Ties in cost (relative 1e-12) go to the lexicographically smallest
    vertex sequence.
    """
    k, D = instance.k, instance.k + 1
    if k > MAX_ORACLE_CANDIDATES:
        raise TooLargeError(f"{k} candidates; oracle handles at most {MAX_ORACLE_CANDIDATES}")
    T = instance._arcs
    P = instance.drop_penalty
    budget = instance.travel_budget + _EPS
    if T[0][D] > budget:
        raise InfeasibleSortieError("direct flight infeasible")
    best: list = [math.inf, None]

    def offer(prefix: list[int], length_to_last: float, last: int):
        length = length_to_last + T[last][D]
        cost = length + P * (k - len(prefix))
        route = (0, *prefix, D)
        tol = 1e-12 * max(1.0, abs(cost))
        if cost < best[0] - tol or (abs(cost - best[0]) <= tol and route < best[1]):
            best[0], best[1] = cost, route

    def dfs(prefix: list[int], used: set[int], length: float, last: int):
        offer(prefix, length, last)
        for c in range(1, k + 1):
            if c in used:
                continue
            nl = length + T[last][c]
            # triangle inequality: any extension reaches D no sooner than c -> D
            if nl + T[c][D] > budget:
                continue
            prefix.append(c)
            used.add(c)
            dfs(prefix, used, nl, c)
            used.discard(c)
            prefix.pop()

    dfs([], set(), 0.0, 0)
    return make_solution(instance, best[1][1:-1])


def solve(instance: EvrptwInstance, params: TabuParams = TabuParams()) -> EvrptwSolution:
    return tabu_search(instance, construct_initial(instance), params)


def random_instance(seed: int, n_candidates: int, box: float = 8000.0) -> EvrptwInstance:
    """Random sortie whose budget usually forces some choice of drops."""
    rng = np.random.Generator(np.random.Philox(seed))
    pts = rng.uniform(0.0, box, size=(n_candidates + 2, 2))
    speed = 10.0
    burn = uav_power(speed)
    capacity = 287_700.0
    clock0 = float(rng.uniform(0.0, 3600.0))
    direct = math.dist(pts[0], pts[-1]) / speed
    t_start = clock0 + float(rng.uniform(0.0, 1500.0))
    t_end = t_start + float(rng.uniform(200.0, 1800.0))
    if t_end < clock0 + direct:
        t_end = clock0 + direct + float(rng.uniform(0.0, 600.0))
    return EvrptwInstance(pts[0], pts[-1], pts[1:-1], t_start, t_end, speed=speed,
                          fuel_capacity=capacity, burn_rate=burn, clock0=clock0)


def dumps_instance(instance: EvrptwInstance, solution: EvrptwSolution | None = None) -> str:
    d = {"instance": instance.to_dict()}
    if solution is not None:
        d["solution"] = solution.to_dict()
    return json.dumps(d, indent=2) + "\n"


def loads_instance(text: str) -> tuple[EvrptwInstance, EvrptwSolution | None]:
    d = json.loads(text)
    sol = d.get("solution")
    return EvrptwInstance.from_dict(d["instance"]), (EvrptwSolution.from_dict(sol) if sol else None)
