from pathlib import Path

import pytest

from rendezvous_rl.env import Env
from rendezvous_rl.scenario import RoadGraph, Scenario, TaskPoint, VehicleParams, load_scenario

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def grid12():
    return load_scenario(FIXTURES / "grid12.json")


@pytest.fixture(scope="session")
def grid12_env(grid12):
    # transitions are deterministic, so one cache serves every test
    return Env(grid12)


def line_scenario(length=4500.0, mid_point=False, off_road=()):
    """Straight road 0 -> 1 (optionally through a middle node) with on-road points at the ends."""
    if mid_point:
        nodes = [[0.0, 0.0], [length / 2, 0.0], [length, 0.0]]
        road = RoadGraph.from_points(nodes, [(0, 1), (1, 2)])
        pts = [TaskPoint(0, length, 0.0, True), TaskPoint(1, length / 2, 0.0, True)]
    else:
        road = RoadGraph.from_points([[0.0, 0.0], [length, 0.0]], [(0, 1)])
        pts = [TaskPoint(0, length, 0.0, True)]
    for x, y in off_road:
        pts.append(TaskPoint(len(pts), x, y, False))
    return Scenario(tuple(pts), road, 0, VehicleParams(), (0.0, -length, length, length))


def random_episode(env, seed):
    """Uniformly random valid actions until the episode ends."""
    import numpy as np

    from rendezvous_rl.env import Episode

    rng = np.random.Generator(np.random.Philox(seed))
    ep = Episode()
    state = env.reset()
    ep.states.append(state)
    done = False
    while not done:
        valid = np.flatnonzero(env.mask(state))
        a = int(valid[rng.integers(len(valid))])
        state, r, done, out = env.step(state, a)
        ep.actions.append(a)
        ep.rewards.append(r)
        ep.outcomes.append(out)
        ep.states.append(state)
    ep.success = state.complete
    return ep


ACCEPTANCE_LINES: list[str] = []


def report_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}")
    print(ACCEPTANCE_LINES[-1])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
