import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rendezvous_rl.energy import uav_power
from rendezvous_rl.evrptw import (
    EvrptwInstance,
    InfeasibleSortieError,
    MalformedRouteError,
    TabuParams,
    TooLargeError,
    brute_force_oracle,
    check_feasibility,
    construct_initial,
    dumps_instance,
    evrptw_cost,
    loads_instance,
    make_solution,
    random_instance,
    tabu_search,
)


def inst(cands=(), start=(0.0, 0.0), terminal=(1000.0, 0.0), t_start=0.0, t_end=10_000.0, **kw):
    return EvrptwInstance(np.array(start), np.array(terminal), np.array(cands, dtype=float).reshape(-1, 2),
                          t_start, t_end, **kw)


@pytest.fixture(scope="module")
def small1(fixtures_dir):
    return loads_instance((fixtures_dir / "evrptw-small-1.json").read_text())


def test_cost_single_arc():
    i = inst()
    assert evrptw_cost(i, make_solution(i, ())) == pytest.approx(100.0)


def test_cost_counts_drops():
    i = inst([(5, 5), (6, 6), (7, 7)], drop_penalty=10_000.0)
    assert evrptw_cost(i, make_solution(i, ())) == pytest.approx(30_100.0)


def test_cost_rejects_bad_endpoints():
    i = inst([(5, 5)])
    bad = make_solution(i, (1,))
    with pytest.raises(MalformedRouteError):
        evrptw_cost(i, type(bad)((1, 0, 2), bad.visited, bad.arrival, bad.fuel_at))


def test_small_fixture_matches_oracle(small1):
    i, stored = small1
    o = brute_force_oracle(i)
    assert o.route == stored.route
    assert evrptw_cost(i, o) == pytest.approx(evrptw_cost(i, stored), abs=1e-9)
    init = construct_initial(i)
    assert evrptw_cost(i, init) <= 2 * evrptw_cost(i, o)
    t = tabu_search(i, init)
    assert evrptw_cost(i, t) == pytest.approx(evrptw_cost(i, o), abs=1e-9)


def test_tabu_keeps_an_optimal_start(small1):
    i, stored = small1
    out = tabu_search(i, make_solution(i, stored.inner))
    assert evrptw_cost(i, out) == pytest.approx(evrptw_cost(i, stored), abs=1e-9)


def test_feasibility_direct_ok():
    i = inst()
    assert check_feasibility(i, make_solution(i, ())).ok


def test_fuel_underflow_reported():
    # 9 km out and 9 km back exceeds the ~14.5 km range
    i = inst([(9000.0, 0.0)], terminal=(0.0, 0.0), t_end=1e6)
    rep = check_feasibility(i, make_solution(i, (1,)))
    assert "fuel_underflow at vertex 2" in rep.violations


def test_window_overrun_and_early():
    i = inst(t_start=0.0, t_end=50.0)
    assert "window_overrun" in check_feasibility(i, make_solution(i, ())).violations
    j = inst(t_start=500.0)
    s = make_solution(j, ())
    assert s.arrival[-1] == 500.0
    assert check_feasibility(j, s).ok
    early = type(s)(s.route, s.visited, (0.0, 100.0), s.fuel_at)
    rep = check_feasibility(j, early).violations
    assert "window_early" in rep and "arrival_recursion at vertex 1" in rep


def test_tampered_fuel_and_visits():
    i = inst([(500.0, 300.0)])
    s = make_solution(i, (1,))
    bad_fuel = type(s)(s.route, s.visited, s.arrival, (s.fuel_at[0], s.fuel_at[1] + 5.0, s.fuel_at[2]))
    assert any(v.startswith("fuel_recursion") for v in check_feasibility(i, bad_fuel).violations)
    bad_vis = type(s)(s.route, (False,), s.arrival, s.fuel_at)
    assert "visited_mismatch" in check_feasibility(i, bad_vis).violations
    rep = type(s)((0, 1, 1, 2), s.visited, s.arrival + (s.arrival[-1],), s.fuel_at + (s.fuel_at[-1],))
    assert "repeated_vertex" in check_feasibility(i, rep).violations


def test_construct_initial_cases():
    assert construct_initial(inst()).route == (0, 1)
    assert construct_initial(inst([(500.0, 100.0)])).route == (0, 1, 2)
    with pytest.raises(InfeasibleSortieError):
        construct_initial(inst(terminal=(20_000.0, 0.0), t_end=1e6))


def test_oracle_cases():
    assert brute_force_oracle(inst()).route == (0, 1)
    # candidates mirrored about the S-D axis have equal cost; the smaller id wins
    sym = inst([(500.0, 400.0), (500.0, -400.0)], t_end=200.0)
    o = brute_force_oracle(sym)
    assert o.route == (0, 1, 3)
    with pytest.raises(TooLargeError):
        brute_force_oracle(inst([(i * 10.0, 5.0) for i in range(10)]))


def test_tabu_deterministic():
    i = random_instance(3, 8)
    init = construct_initial(i)
    a = tabu_search(i, init, TabuParams(seed=5))
    b = tabu_search(i, init, TabuParams(seed=5))
    assert a == b


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 100_000), k=st.integers(0, 7))
def test_solver_properties(seed, k):
    i = random_instance(seed, k)
    init = construct_initial(i)
    t = tabu_search(i, init, TabuParams(iters=150))
    o = brute_force_oracle(i)
    for s in (init, t, o):
        assert check_feasibility(i, s).ok
        fuel = np.array(s.fuel_at)
        assert np.all(np.diff(fuel) <= 1e-9)
    assert evrptw_cost(i, t) <= evrptw_cost(i, init) + 1e-9
    assert evrptw_cost(i, t) >= evrptw_cost(i, o) - 1e-9


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 100_000), k=st.integers(1, 6))
def test_penalty_dominance(seed, k):
    i = random_instance(seed, k)
    o = brute_force_oracle(i)
    # no feasible single insertion remains into the optimal route
    T = i.arc_time
    route = list(o.route)
    used = i.route_time(o.inner)
    for c in range(1, k + 1):
        if c in route:
            continue
        for q in range(len(route) - 1):
            a, b = route[q], route[q + 1]
            assert used + T[a, c] + T[c, b] - T[a, b] > i.travel_budget - 1e-9


def test_oracle_matches_explicit_enumeration():
    i = random_instance(11, 4)
    best = None
    for r in range(5):
        for perm in itertools.permutations(range(1, 5), r):
            s = make_solution(i, perm)
            if check_feasibility(i, s).ok:
                key = (evrptw_cost(i, s), s.route)
                best = key if best is None or key < best else best
    assert brute_force_oracle(i).route == best[1]


def test_round_trip():
    i = random_instance(2, 4)
    s = brute_force_oracle(i)
    i2, s2 = loads_instance(dumps_instance(i, s))
    assert s2 == s
    assert np.array_equal(i2.arc_time, i.arc_time)
    assert i2.burn_rate == uav_power(10.0)
