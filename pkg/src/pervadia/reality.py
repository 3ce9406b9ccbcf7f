"""Mapping between physical, measured and virtual space and time.

Sensors turn ground-truth positions into noised, quantized, clock-skewed
measurements; ingestion reconciles device time back to engine time before
anything reaches the event log; actuator projection crosses measured space in
the opposite direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from random import Random
from typing import Optional

from pervadia.errors import TimeReconciliationError, UnboundSessionError, UnknownActuatorError
from pervadia.geo import EARTH_RADIUS_M, GeoPoint, haversine_m

DEFAULT_CLOCK_BOUND_MS = 60_000

_DEG = math.pi / 180.0


@dataclass(frozen=True)
class PhysicalFix:
    """Ground truth; exists only inside the physical-world simulator."""

    pos: GeoPoint
    phys_time: int  # ms


@dataclass(frozen=True)
class MeasuredFix:
    pos: GeoPoint
    accuracy: float  # meters
    device_time: int  # ms, on the device's skewed clock
    device: str


@dataclass(frozen=True)
class SensorModel:
    sigma: float = 0.0  # meters, Gaussian noise per tangent-plane axis
    decimals: int = 6  # quantization digits for degrees
    dropout: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma < 0 or self.decimals < 0 or not 0.0 <= self.dropout <= 1.0:
            raise ValueError(f"bad sensor model: {self}")


@dataclass(frozen=True)
class ClockModel:
    """device_time = phys_time * (1 + drift_ppm * 1e-6) + offset_ms."""

    offset_ms: float = 0.0
    drift_ppm: float = 0.0

    def device_time(self, phys_time: float) -> float:
        return phys_time * (1.0 + self.drift_ppm * 1e-6) + self.offset_ms

    def reconcile(self, device_time: float) -> float:
        return (device_time - self.offset_ms) / (1.0 + self.drift_ppm * 1e-6)


IDENTITY_CLOCK = ClockModel()


def offset_point(p: GeoPoint, east_m: float, north_m: float) -> GeoPoint:
    """Displace a point by meters in the local tangent plane."""
    dlat = north_m / (EARTH_RADIUS_M * _DEG)
    dlon = east_m / (EARTH_RADIUS_M * math.cos(p.lat * _DEG) * _DEG)
    lat = min(90.0, max(-90.0, p.lat + dlat))
    lon = p.lon + dlon
    lon = (lon + 180.0) % 360.0 - 180.0
    if lon == -180.0:
        lon = 180.0
    return GeoPoint(lat, lon)


def measure(
    fix: PhysicalFix,
    sensor: SensorModel,
    clock: ClockModel,
    rng: Random,
    device: str = "sim",
) -> Optional[MeasuredFix]:
    """Simulate one sensor reading: dropout, Gaussian noise, then quantization."""
    if sensor.dropout > 0.0 and rng.random() < sensor.dropout:
        return None
    pos = fix.pos
    if sensor.sigma > 0.0:
        pos = offset_point(pos, rng.gauss(0.0, sensor.sigma), rng.gauss(0.0, sensor.sigma))
    pos = GeoPoint(round(pos.lat, sensor.decimals), round(pos.lon, sensor.decimals))
    device_time = round(clock.device_time(fix.phys_time))
    return MeasuredFix(pos=pos, accuracy=sensor.sigma, device_time=device_time, device=device)


def reconcile_time(
    device_time: float,
    clock: ClockModel,
    sim_time: Optional[float] = None,
    bound_ms: float = DEFAULT_CLOCK_BOUND_MS,
) -> int:
    """Invert the device clock model; reject implausible results.

    With `sim_time` given, a reconciled time more than `bound_ms` away from it
    means the device clock (or the model for it) is wrong.
    """
    reconciled = clock.reconcile(device_time)
    if sim_time is not None and abs(reconciled - sim_time) > bound_ms:
        raise TimeReconciliationError(
            f"device clock implausible: reconciled {reconciled:.0f} vs sim {sim_time:.0f}"
        )
    return round(reconciled)


@dataclass(frozen=True)
class ActuatorCalibration:
    """An actuator's measured frame: spatial offset plus its clock model."""

    east_m: float = 0.0
    north_m: float = 0.0
    clock: ClockModel = IDENTITY_CLOCK


@dataclass(frozen=True)
class ActuatorCommand:
    target: GeoPoint
    actuator: str


class ActuatorRegistry:
    def __init__(self) -> None:
        self._calibrations: dict[str, ActuatorCalibration] = {}

    def register(self, name: str, calibration: ActuatorCalibration = ActuatorCalibration()) -> None:
        self._calibrations[name] = calibration

    def project(self, target: GeoPoint, actuator: str) -> ActuatorCommand:
        """Express a virtual target point in the actuator's measured frame."""
        cal = self._calibrations.get(actuator)
        if cal is None:
            raise UnknownActuatorError(f"no such actuator: {actuator}")
        # Inverse of the calibration offset: command the frame so the physical
        # effect lands on the target.
        measured = offset_point(target, -cal.east_m, -cal.north_m)
        return ActuatorCommand(target=measured, actuator=actuator)


def ingest(measured: MeasuredFix, session, world, clock: ClockModel,
           bound_ms: float = DEFAULT_CLOCK_BOUND_MS) -> None:
    """Record a measured fix as a move event with a reconciled timestamp.

    Raw device timestamps never reach the log; the avatar's geo anchor is
    updated and the event payload carries the accuracy radius.
    """
    if getattr(session, "avatar", None) is None:
        raise UnboundSessionError(f"session {session!r} is not bound to an avatar")
    reconciled = reconcile_time(measured.device_time, clock, sim_time=world.sim_time, bound_ms=bound_ms)
    world.move_entity(
        session.avatar,
        geo_anchor=measured.pos,
        payload={
            "accuracy": measured.accuracy,
            "device": measured.device,
            "measured_at": reconciled,
            "provenance": "sensor",
        },
    )
