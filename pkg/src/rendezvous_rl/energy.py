"""UAV power/fuel model, recharge durations and UGV energy accounting.

Units are SI throughout: m/s, W, J, s.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PowerProfile:
    """Cubic UAV power draw ``c3 v^3 + c2 v^2 + c1 v + c0`` in watts."""

    c3: float = 0.0461
    c2: float = -0.5834
    c1: float = -1.8761
    c0: float = 229.6

    def as_list(self) -> list[float]:
        return [self.c3, self.c2, self.c1, self.c0]


DEFAULT_PROFILE = PowerProfile()

DEFAULT_RECHARGE_RATE = 342.5  # W; one empty-to-full recharge of 287.7 kJ takes 840 s
DEFAULT_UGV_TRAVEL_POWER = 4408.0  # W
DEFAULT_UGV_IDLE_POWER = 356.2  # W


def uav_power(v: float, profile: PowerProfile = DEFAULT_PROFILE) -> float:
    """Power draw at speed ``v``; accepts scalars or arrays."""
    if np.any(np.asarray(v) < 0):
        raise ValueError(f"speed must be non-negative, got {v}")
    # Horner form; v=0 returns c0 exactly.
    return ((profile.c3 * v + profile.c2) * v + profile.c1) * v + profile.c0


def hover_power(profile: PowerProfile = DEFAULT_PROFILE) -> float:
    return uav_power(0.0, profile)


def flight_endurance(fuel: float, v: float, profile: PowerProfile = DEFAULT_PROFILE) -> float:
    """Seconds the UAV can fly at speed ``v`` on ``fuel`` joules."""
    if fuel < 0:
        raise ValueError(f"fuel must be non-negative, got {fuel}")
    return fuel / uav_power(v, profile)


def flight_range(fuel: float, v: float, profile: PowerProfile = DEFAULT_PROFILE) -> float:
    """Straight-line distance (m) coverable at constant speed ``v``."""
    return v * flight_endurance(fuel, v, profile)


def fuel_used(v: float, duration: float, profile: PowerProfile = DEFAULT_PROFILE) -> float:
    return uav_power(v, profile) * duration


def recharge_time(fuel: float, capacity: float, rate: float) -> float:
    if rate <= 0:
        raise ValueError(f"recharge rate must be positive, got {rate}")
    if not 0 <= fuel <= capacity:
        raise ValueError(f"fuel {fuel} outside [0, {capacity}]")
    return (capacity - fuel) / rate


def ugv_energy(travel_t: float, wait_t: float, params) -> float:
    """Joules spent by the UGV driving for ``travel_t`` s and idling for ``wait_t`` s.

    ``params`` is anything carrying ``ugv_travel_power`` and ``ugv_idle_power``
    (normally a :class:`~rendezvous_rl.scenario.VehicleParams`).
    """
    if travel_t < 0 or wait_t < 0:
        raise ValueError("durations must be non-negative")
    return travel_t * params.ugv_travel_power + wait_t * params.ugv_idle_power
