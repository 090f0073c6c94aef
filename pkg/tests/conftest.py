"""Shared scenario builders and the acceptance summary printed after the run."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dopplerwarn.scenario import EventClass, ScenarioConfig, Trajectory, constant

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

KMH_120 = 120 / 3.6
C = 299_792_458.0

# lines recorded by the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def pass_by(
    f_c: float = 760e6,
    v: float = KMH_120,
    v_o: float = 25.0,
    gap: float = 150.0,
    meet: float = 6.0,
    duration: float = 10.0,
    lane: float = 3.5,
) -> ScenarioConfig:
    """T_X at 0 and R_X at ``gap``, both at ``v``; oncoming meets R_X at ``meet``."""
    return ScenarioConfig(
        tx=constant(0.0, v),
        rx=constant(gap, v),
        oncoming=constant(gap + (v + v_o) * meet, -v_o, lane),
        carrier_frequency=f_c,
        duration=duration,
        event_class=EventClass.VEHICLE_APPROACHING,
    )


def cruise(f_c: float = 760e6, v: float = KMH_120, gap: float = 150.0, duration: float = 10.0) -> ScenarioConfig:
    return ScenarioConfig(
        tx=constant(0.0, v),
        rx=constant(gap, v),
        carrier_frequency=f_c,
        duration=duration,
        event_class=EventClass.NO_ONCOMING_VEHICLE,
    )


def parked(f_c: float = 760e6, duration: float = 10.0) -> ScenarioConfig:
    return ScenarioConfig(
        tx=constant(0.0, 0.0),
        rx=constant(150.0, 0.0),
        carrier_frequency=f_c,
        duration=duration,
        event_class=EventClass.NO_ACTIVITY,
    )


def path_length_oracle(scenario: ScenarioConfig, t: float) -> float:
    """T_X -> oncoming -> R_X path length for constant-speed trajectories."""

    def pos(tr: Trajectory):
        assert not tr.accel, "oracle handles constant speeds only"
        return np.array([tr.position + tr.speed * t, tr.lane])

    tx, rx, oc = pos(scenario.tx), pos(scenario.rx), pos(scenario.oncoming)
    return float(np.linalg.norm(oc - tx) + np.linalg.norm(rx - oc))


def doppler_oracle(scenario: ScenarioConfig, t: float, h: float = 1e-3) -> float:
    """Central difference of the path length over a 1 ms step, scaled by f_c/c."""
    rate = (path_length_oracle(scenario, t + h / 2) - path_length_oracle(scenario, t - h / 2)) / h
    return -rate * scenario.carrier_frequency / C


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
