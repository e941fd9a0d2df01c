"""Core domain types: stations, trips, GPS trajectories, and live system state.

All timestamps are integer seconds since the Unix epoch (UTC). Positions are
planar coordinates in meters (a local tangent plane, not lat/lon).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    BikeNotDocked,
    BikeNotInTransit,
    StationFull,
    UnknownStation,
)


@dataclass(frozen=True)
class Station:
    station_id: str
    x: float
    y: float
    capacity: int

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class StationMap:
    """The fixed set of dock stations a deployment operates."""

    stations: tuple[Station, ...]

    def __post_init__(self):
        if len(self.stations) < 2:
            raise ValueError("a station map needs at least 2 stations")
        ids = [s.station_id for s in self.stations]
        if len(set(ids)) != len(ids):
            raise ValueError("station ids must be unique")
        for s in self.stations:
            if s.capacity < 1:
                raise ValueError(f"station {s.station_id} has capacity < 1")

    @property
    def ids(self) -> list[str]:
        return [s.station_id for s in self.stations]

    def __contains__(self, station_id: str) -> bool:
        return any(s.station_id == station_id for s in self.stations)

    def get(self, station_id: str) -> Station:
        for s in self.stations:
            if s.station_id == station_id:
                return s
        raise UnknownStation(station_id)

    def index_of(self, station_id: str) -> int:
        for i, s in enumerate(self.stations):
            if s.station_id == station_id:
                return i
        raise UnknownStation(station_id)


@dataclass(frozen=True)
class TripRecord:
    """One hire event: who left from where and when, and where it ended."""

    user_id: str
    leave_station: str
    leave_time: int
    return_station: str
    return_time: int

    def __post_init__(self):
        if self.return_time <= self.leave_time:
            raise ValueError(
                f"return_time {self.return_time} must be after leave_time {self.leave_time}"
            )

    @property
    def duration(self) -> int:
        return self.return_time - self.leave_time

    def validate_against(self, station_map: StationMap) -> None:
        for sid in (self.leave_station, self.return_station):
            if sid not in station_map:
                raise UnknownStation(sid)


@dataclass(frozen=True)
class GpsTrajectory:
    """Timestamped position sequence for one journey.

    ``destination`` and ``arrival_time`` carry the ground truth when known
    (training data); both are None for a live prefix awaiting prediction.
    """

    trip_id: str
    points: tuple[tuple[int, float, float], ...]  # (t, x, y)
    destination: str | None = None
    arrival_time: int | None = None

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("a trajectory needs at least 2 points")
        times = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("trajectory points must be strictly ordered by time")
        if (self.destination is None) != (self.arrival_time is None):
            raise ValueError("destination and arrival_time must be both present or both absent")

    @property
    def has_ground_truth(self) -> bool:
        return self.destination is not None


@dataclass(frozen=True)
class Pickup:
    bike_id: str
    user_id: str
    station_id: str
    time: int


@dataclass(frozen=True)
class Return:
    bike_id: str
    station_id: str
    time: int


Event = Pickup | Return


@dataclass(frozen=True)
class TransitRecord:
    user_id: str
    departure_station: str
    departure_time: int


@dataclass(frozen=True)
class SystemState:
    """Live picture of which bikes are docked where and which are out.

    Values are immutable; :func:`apply_event` returns a new state, so a
    snapshot can be read concurrently while a single writer advances it.
    """

    stations: StationMap
    docked: dict[str, frozenset[str]] = field(default_factory=dict)
    in_transit: dict[str, TransitRecord] = field(default_factory=dict)

    @classmethod
    def empty(cls, stations: StationMap) -> "SystemState":
        return cls(stations, {sid: frozenset() for sid in stations.ids}, {})

    @classmethod
    def with_bikes(cls, stations: StationMap, docked: dict[str, list[str]]) -> "SystemState":
        """Build an initial state with the given bikes docked per station."""
        full = {sid: frozenset() for sid in stations.ids}
        for sid, bikes in docked.items():
            if sid not in stations:
                raise UnknownStation(sid)
            if len(bikes) > stations.get(sid).capacity:
                raise StationFull(sid)
            full[sid] = frozenset(bikes)
        state = cls(stations, full, {})
        state.check_invariants()
        return state

    def total_bikes(self) -> int:
        return sum(len(b) for b in self.docked.values()) + len(self.in_transit)

    def check_invariants(self) -> None:
        seen: set[str] = set()
        for sid, bikes in self.docked.items():
            if len(bikes) > self.stations.get(sid).capacity:
                raise StationFull(sid)
            overlap = seen & bikes
            if overlap:
                raise ValueError(f"bikes docked twice: {sorted(overlap)}")
            seen |= bikes
        dup = seen & set(self.in_transit)
        if dup:
            raise ValueError(f"bikes both docked and in transit: {sorted(dup)}")


def apply_event(state: SystemState, event: Event) -> SystemState:
    """Advance the system state by one pickup or return.

    Rejected events raise without touching ``state``.
    """
    if isinstance(event, Pickup):
        if event.station_id not in state.stations:
            raise UnknownStation(event.station_id)
        if event.bike_id not in state.docked[event.station_id]:
            raise BikeNotDocked(
                f"bike {event.bike_id} is not docked at {event.station_id}"
            )
        docked = dict(state.docked)
        docked[event.station_id] = state.docked[event.station_id] - {event.bike_id}
        in_transit = dict(state.in_transit)
        in_transit[event.bike_id] = TransitRecord(
            event.user_id, event.station_id, event.time
        )
        return SystemState(state.stations, docked, in_transit)

    if isinstance(event, Return):
        if event.station_id not in state.stations:
            raise UnknownStation(event.station_id)
        if event.bike_id not in state.in_transit:
            raise BikeNotInTransit(f"bike {event.bike_id} is not in transit")
        if len(state.docked[event.station_id]) >= state.stations.get(event.station_id).capacity:
            raise StationFull(event.station_id)
        docked = dict(state.docked)
        docked[event.station_id] = state.docked[event.station_id] | {event.bike_id}
        in_transit = dict(state.in_transit)
        del in_transit[event.bike_id]
        return SystemState(state.stations, docked, in_transit)

    raise TypeError(f"unknown event type: {type(event).__name__}")


def all_bikes_now(state: SystemState) -> dict[str, int]:
    """How many bikes are parked in each station right now."""
    return {sid: len(state.docked[sid]) for sid in state.stations.ids}
