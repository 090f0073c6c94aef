"""Vehicle kinematics, Doppler bounds and ground-truth event timelines.

Geometry is two-dimensional: ``x`` runs along the road in the travel
direction of the transmitter (T_X, rear) and receiver (R_X, front), ``y`` is
the lateral lane offset.  The oncoming vehicle drives on the adjacent lane in
the opposite direction (negative speed).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError

SPEED_OF_LIGHT = 299_792_458.0
MAX_SPEED = 60.0
DEFAULT_LANE_OFFSET = 3.5
GAP_RANGE = (100.0, 250.0)


@dataclass(frozen=True)
class PhysConstants:
    c: float = SPEED_OF_LIGHT


PHYS = PhysConstants()


class EventClass(enum.IntEnum):
    NO_ACTIVITY = 0
    NO_ONCOMING_VEHICLE = 1
    VEHICLE_APPROACHING = 2
    VEHICLE_DRIVING_AWAY = 3

    @property
    def wire_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_wire(cls, name: str) -> "EventClass":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            valid = ", ".join(c.wire_name for c in cls)
            raise ValueError(f"unknown class name {name!r} (expected one of: {valid})") from None


class SpikeRegion(enum.Enum):
    APPROACHING = "approaching"
    RECEDING = "receding"
    IN_BAND = "in_band"


@dataclass(frozen=True)
class VehicleState:
    position: float
    speed: float
    lane: float = 0.0

    def __post_init__(self):
        if not abs(self.speed) <= MAX_SPEED:
            raise DomainError(f"|speed| = {abs(self.speed):.2f} m/s exceeds {MAX_SPEED} m/s")


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-constant-acceleration motion along one lane.

    ``accel`` holds ``(start_time, acceleration)`` breakpoints; the
    acceleration before the first breakpoint is zero and each value holds
    until the next breakpoint.
    """

    position: float
    speed: float
    lane: float = 0.0
    accel: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        pts = tuple((float(t), float(a)) for t, a in self.accel)
        if any(t < 0 for t, _ in pts):
            raise DomainError("acceleration breakpoints must be at t >= 0")
        if any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
            raise DomainError("acceleration breakpoints must be strictly increasing")
        object.__setattr__(self, "accel", pts)
        for name in ("position", "speed", "lane"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def _segments(self, t: float):
        """Yield ``(start, end, acceleration)`` covering ``[0, t]``."""
        start, a = 0.0, 0.0
        for bt, ba in self.accel:
            if bt >= t:
                break
            if bt > start:
                yield start, bt, a
            start, a = bt, ba
        yield start, t, a

    def state(self, t: float) -> VehicleState:
        x, v = float(self.position), float(self.speed)
        for s, e, a in self._segments(t):
            dt = e - s
            x += v * dt + 0.5 * a * dt * dt
            v += a * dt
        return VehicleState(x, v, self.lane)

    def acceleration(self, t: float) -> float:
        a = 0.0
        for bt, ba in self.accel:
            if bt > t:
                break
            a = ba
        return a

    def breakpoints(self) -> list[float]:
        return [t for t, _ in self.accel]

    def is_static(self) -> bool:
        return self.speed == 0 and all(a == 0 for _, a in self.accel)


def constant(position: float, speed: float, lane: float = 0.0) -> Trajectory:
    return Trajectory(position, speed, lane)


@dataclass(frozen=True)
class ScenarioConfig:
    tx: Trajectory
    rx: Trajectory
    oncoming: Optional[Trajectory] = None
    carrier_frequency: float = 760e6
    duration: float = 10.0
    snapshot_period: float = 0.40
    event_class: EventClass = EventClass.NO_ONCOMING_VEHICLE

    def __post_init__(self):
        object.__setattr__(self, "event_class", EventClass(self.event_class))
        for name in ("carrier_frequency", "duration", "snapshot_period"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.duration < 0:
            raise DomainError("duration must be non-negative")
        if self.snapshot_period <= 0:
            raise DomainError("snapshot_period must be positive")
        if self.carrier_frequency <= 0:
            raise DomainError("carrier_frequency must be positive")
        for traj in self.vehicles():
            for t in [0.0, *traj.breakpoints(), self.duration]:
                if 0 <= t <= self.duration:
                    traj.state(t)  # VehicleState enforces the speed bound
        moving = not all(traj.is_static() for traj in self.vehicles())
        if self.event_class is EventClass.NO_ACTIVITY and moving:
            raise DomainError("no_activity scenario requires all speeds to be zero")
        if (
            self.event_class in (EventClass.VEHICLE_APPROACHING, EventClass.VEHICLE_DRIVING_AWAY)
            and self.oncoming is None
        ):
            raise DomainError(f"{self.event_class.wire_name} scenario requires an oncoming vehicle")
        if not (self.tx.is_static() and self.rx.is_static()):
            lo, hi = GAP_RANGE
            if not lo <= self.tx_rx_gap <= hi:
                raise DomainError(f"tx_rx_gap {self.tx_rx_gap:.1f} m outside [{lo}, {hi}] m")

    @property
    def tx_rx_gap(self) -> float:
        return self.rx.position - self.tx.position

    def vehicles(self) -> list[Trajectory]:
        out = [self.tx, self.rx]
        if self.oncoming is not None:
            out.append(self.oncoming)
        return out

    def snapshot_times(self) -> np.ndarray:
        # one sweep per period, every start instant strictly before the end
        n = int(math.ceil(self.duration / self.snapshot_period - 1e-9))
        return np.arange(n) * self.snapshot_period


def max_doppler_shift(v_t: float, v_r: float, f_c: float) -> float:
    """Largest Doppler shift from static scatterers, ``(v_t + v_r) / c * f_c``."""
    if v_t < 0 or v_r < 0:
        raise DomainError("speeds must be non-negative")
    if f_c <= 0:
        raise DomainError("carrier frequency must be positive")
    return (v_t + v_r) / PHYS.c * f_c


def _range_rate(a: VehicleState, b: VehicleState) -> float:
    dx, dy = b.position - a.position, b.lane - a.lane
    dist = math.hypot(dx, dy)
    if dist == 0.0:
        return 0.0
    return dx * (b.speed - a.speed) / dist


def _check_time(scenario: ScenarioConfig, t: float) -> None:
    if not 0.0 <= t <= scenario.duration + 1e-9:
        raise DomainError(f"t = {t} s outside [0, {scenario.duration}] s")


def bistatic_doppler(scenario: ScenarioConfig, t: float) -> float:
    """Doppler shift (Hz) of the T_X -> oncoming -> R_X reflection at time ``t``.

    Positive while the total path shortens (oncoming vehicle closing in).
    """
    if scenario.oncoming is None:
        raise DomainError("scenario has no oncoming vehicle")
    _check_time(scenario, t)
    tx, rx, oc = (traj.state(t) for traj in (scenario.tx, scenario.rx, scenario.oncoming))
    rate = _range_rate(tx, oc) + _range_rate(oc, rx)
    return -rate * scenario.carrier_frequency / PHYS.c


def band_edge(scenario: ScenarioConfig, t: float) -> float:
    """Δf_max at time ``t`` from the instantaneous T_X and R_X speeds."""
    _check_time(scenario, t)
    return max_doppler_shift(
        abs(scenario.tx.state(t).speed), abs(scenario.rx.state(t).speed), scenario.carrier_frequency
    )


def classify_spike_region(spike_freq: float, delta_f_max: float) -> SpikeRegion:
    if delta_f_max < 0:
        raise DomainError("delta_f_max must be non-negative")
    if spike_freq > delta_f_max:
        return SpikeRegion.APPROACHING
    if spike_freq < -delta_f_max:
        return SpikeRegion.RECEDING
    return SpikeRegion.IN_BAND


def _real_roots(a: float, b: float, c: float) -> list[float]:
    """Real roots of a*x^2 + b*x + c, stable when ``a`` is tiny or zero."""
    if a == 0.0:
        return [-c / b] if b != 0.0 else []
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    if q == 0.0:
        return [0.0]
    with np.errstate(over="ignore", divide="ignore"):
        roots = [q / a, c / q]
    return [r for r in roots if math.isfinite(r)]


def intersection_time(scenario: ScenarioConfig) -> Optional[float]:
    """Earliest time the oncoming vehicle draws level with R_X, if it does."""
    if scenario.oncoming is None:
        return None
    oc, rx = scenario.oncoming, scenario.rx
    cuts = sorted({0.0, scenario.duration, *oc.breakpoints(), *rx.breakpoints()})
    cuts = [c for c in cuts if 0.0 <= c <= scenario.duration]
    for s, e in zip(cuts, cuts[1:] or cuts):
        so, sr = oc.state(s), rx.state(s)
        d0 = so.position - sr.position
        dv = so.speed - sr.speed
        da = oc.acceleration(s) - rx.acceleration(s)
        if d0 == 0.0:
            return s
        # d(s + tau) = d0 + dv*tau + da*tau^2/2, tau in [0, e - s]
        hits = sorted(r for r in _real_roots(0.5 * da, dv, d0) if -1e-12 <= r <= (e - s) + 1e-12)
        if hits:
            return s + max(hits[0], 0.0)
    return None


def ground_truth_labels(scenario: ScenarioConfig, snapshot_times: Sequence[float]) -> list[EventClass]:
    """One event label per snapshot time.

    In-band spikes (the pass-by drift) map to ``NO_ONCOMING_VEHICLE``; an
    out-of-band positive spike after the pass-by instant is treated the same
    way so no approach label survives past the intersection.
    """
    times = list(snapshot_times)
    if any(b < a for a, b in zip(times, times[1:])):
        raise DomainError("snapshot_times must be sorted ascending")
    if all(traj.is_static() for traj in scenario.vehicles()):
        return [EventClass.NO_ACTIVITY] * len(times)
    if scenario.oncoming is None:
        return [EventClass.NO_ONCOMING_VEHICLE] * len(times)
    t_meet = intersection_time(scenario)
    labels = []
    for t in times:
        region = classify_spike_region(bistatic_doppler(scenario, t), band_edge(scenario, t))
        if region is SpikeRegion.APPROACHING and (t_meet is None or t < t_meet):
            labels.append(EventClass.VEHICLE_APPROACHING)
        elif region is SpikeRegion.RECEDING:
            labels.append(EventClass.VEHICLE_DRIVING_AWAY)
        else:
            labels.append(EventClass.NO_ONCOMING_VEHICLE)
    return labels


@dataclass(frozen=True)
class ScenarioRanges:
    """Sampling ranges for :func:`random_scenario` (speeds in m/s)."""

    speed: tuple[float, float] = (80 / 3.6, 120 / 3.6)
    oncoming_speed: tuple[float, float] = (15.0, 25.0)
    gap: tuple[float, float] = GAP_RANGE
    accel: float = 0.3
    meet_fraction: tuple[float, float] = (0.6, 0.9)
    passed_distance: tuple[float, float] = (10.0, 80.0)
    lane_offset: float = DEFAULT_LANE_OFFSET


def random_scenario(
    event_class: EventClass,
    rng: np.random.Generator,
    carrier_frequency: float = 2.5e9,
    duration: float = 12.0,
    snapshot_period: float = 0.40,
    ranges: ScenarioRanges = ScenarioRanges(),
) -> ScenarioConfig:
    """Draw a scenario whose headline event is ``event_class``.

    Approaching events are pass-bys with the meeting instant inside the
    scenario; driving-away events start after the oncoming vehicle has
    already passed both T_X and R_X.
    """
    event_class = EventClass(event_class)
    gap = rng.uniform(*ranges.gap)
    if event_class is EventClass.NO_ACTIVITY:
        return ScenarioConfig(
            tx=constant(0.0, 0.0),
            rx=constant(gap, 0.0),
            carrier_frequency=carrier_frequency,
            duration=duration,
            snapshot_period=snapshot_period,
            event_class=event_class,
        )
    v_t, v_r = rng.uniform(*ranges.speed, size=2)
    a_t, a_r = rng.uniform(-ranges.accel, ranges.accel, size=2)
    t_a = rng.uniform(0.0, duration / 2)
    tx = Trajectory(0.0, v_t, 0.0, ((t_a, a_t),))
    rx = Trajectory(gap, v_r, 0.0, ((t_a, a_r),))
    oncoming = None
    if event_class is EventClass.VEHICLE_APPROACHING:
        v_o = rng.uniform(*ranges.oncoming_speed)
        t_meet = rng.uniform(*ranges.meet_fraction) * duration
        # place the meeting point ignoring R_X acceleration; the exact instant
        # is recomputed by intersection_time
        oncoming = constant(gap + (v_r + v_o) * t_meet, -v_o, ranges.lane_offset)
    elif event_class is EventClass.VEHICLE_DRIVING_AWAY:
        v_o = rng.uniform(*ranges.oncoming_speed)
        oncoming = constant(-rng.uniform(*ranges.passed_distance), -v_o, ranges.lane_offset)
    return ScenarioConfig(
        tx=tx,
        rx=rx,
        oncoming=oncoming,
        carrier_frequency=carrier_frequency,
        duration=duration,
        snapshot_period=snapshot_period,
        event_class=event_class,
    )
