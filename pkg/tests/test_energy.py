import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rendezvous_rl.energy import (
    DEFAULT_RECHARGE_RATE,
    PowerProfile,
    flight_endurance,
    flight_range,
    fuel_used,
    hover_power,
    recharge_time,
    uav_power,
    ugv_energy,
)
from rendezvous_rl.scenario import VehicleParams

F = 287_700.0


def test_default_coefficients():
    p = PowerProfile()
    assert (p.c3, p.c2, p.c1, p.c0) == (0.0461, -0.5834, -1.8761, 229.6)


def test_power_values():
    assert uav_power(0.0) == 229.6
    assert hover_power() == 229.6
    assert uav_power(10.0) == pytest.approx(198.599, abs=1e-9)
    assert uav_power(5.0) == pytest.approx(211.397, abs=1e-9)


def test_power_positive_up_to_twice_cruise():
    v = np.linspace(0.0, 20.0, 4001)
    assert np.all(uav_power(v) > 0)


def test_power_decreasing_below_its_minimum():
    # the cubic bottoms out near 9.82 m/s, so it rises again slightly before 10
    v = np.linspace(0.0, 9.8, 2000)
    assert np.all(np.diff(uav_power(v)) < 0)
    assert uav_power(0.0) > uav_power(10.0)


def test_endurance_and_range():
    assert flight_endurance(F, 10.0) == pytest.approx(1448.65, abs=0.01)
    assert flight_endurance(F, 10.0) / 60 == pytest.approx(24.14, abs=0.01)
    assert flight_endurance(0.0, 7.0) == 0.0
    assert flight_endurance(F, 0.0) == pytest.approx(1253.05, abs=0.01)
    assert flight_range(F, 10.0) == pytest.approx(14486.5, abs=0.1)


def test_recharge_time():
    assert recharge_time(F, F, DEFAULT_RECHARGE_RATE) == 0.0
    assert recharge_time(0.0, F, 342.5) == pytest.approx(840.0)
    assert recharge_time(143_850.0, F, 342.5) == pytest.approx(420.0)
    with pytest.raises(ValueError):
        recharge_time(F + 1, F, 342.5)
    with pytest.raises(ValueError):
        recharge_time(0.0, F, 0.0)


@given(st.floats(0.0, F))
def test_recharge_restores_capacity(fuel):
    t = recharge_time(fuel, F, DEFAULT_RECHARGE_RATE)
    assert fuel + t * DEFAULT_RECHARGE_RATE == pytest.approx(F, abs=1e-6)


@given(st.lists(st.floats(0.0, 300.0), min_size=1, max_size=6))
def test_leg_fuel_is_additive(legs):
    used = sum(fuel_used(10.0, t) for t in legs)
    assert used == pytest.approx(uav_power(10.0) * sum(legs), rel=1e-12, abs=1e-9)


def test_ugv_energy():
    p = VehicleParams()
    assert ugv_energy(0.0, 0.0, p) == 0.0
    assert ugv_energy(4315.2, 0.0, p) / 1000 == pytest.approx(19021.4, abs=0.1)
    assert ugv_energy(0.0, 913.2, p) / 1000 == pytest.approx(325.3, abs=0.05)
    with pytest.raises(ValueError):
        ugv_energy(-1.0, 0.0, p)
