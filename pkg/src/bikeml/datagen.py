"""Deterministic synthetic bike-sharing usage generator.

Every random draw comes from a counter-style RNG keyed by
``(seed, stream, user_index, trip_index)``, so each user's stream is
independent of generation order and the whole output is a pure function of
the config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import GpsTrajectory, Station, StationMap, TripRecord
from .errors import InvalidConfig

# All generated activity starts at this epoch (2022-01-03 00:00 UTC, a Monday).
BASE_EPOCH = 1641168000

AREA_SIZE_M = 3000.0
DEFAULT_CAPACITY = 20


def keyed_rng(seed: int, *key: int) -> np.random.Generator:
    """RNG for one logical stream, stable under reordering of streams."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


# Stream tags for keyed_rng; disjoint first components keep streams apart.
_STATIONS = 0
_HABIT = 1
_TRIP = 2
_TRAJ = 3


def random_station_map(seed: int, n_stations: int, capacity: int = DEFAULT_CAPACITY) -> StationMap:
    """Uniform station placement in a 3 km x 3 km square."""
    if n_stations < 2:
        raise InvalidConfig("need at least 2 stations")
    rng = keyed_rng(seed, _STATIONS)
    xs = rng.uniform(0.0, AREA_SIZE_M, n_stations)
    ys = rng.uniform(0.0, AREA_SIZE_M, n_stations)
    return StationMap(
        tuple(
            Station(f"s{i}", float(xs[i]), float(ys[i]), capacity)
            for i in range(n_stations)
        )
    )


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int
    station_map: StationMap
    n_users: int
    trips_per_user: int
    habit_strength: float = 0.8
    speed_mps: float = 4.0
    gps_noise_std: float = 5.0
    gps_sample_period: float = 10.0
    duration_noise_sigma: float = 0.1  # log-space std of the duration noise

    def __post_init__(self):
        if not (0.0 <= self.habit_strength <= 1.0):
            raise InvalidConfig("habit_strength must be in [0, 1]")
        if self.n_users < 1 or self.trips_per_user < 1:
            raise InvalidConfig("n_users and trips_per_user must be positive")
        if self.speed_mps <= 0:
            raise InvalidConfig("speed_mps must be positive")
        if self.gps_noise_std < 0:
            raise InvalidConfig("gps_noise_std must be nonnegative")
        if self.gps_sample_period <= 0:
            raise InvalidConfig("gps_sample_period must be positive")
        if self.duration_noise_sigma < 0:
            raise InvalidConfig("duration_noise_sigma must be nonnegative")


@dataclass(frozen=True)
class UserHabit:
    origin: int
    destination: int
    hour: int


def user_habit(config: GeneratorConfig, user_index: int) -> UserHabit:
    """The habitual (origin, destination, hour-of-day) triple of one user."""
    rng = keyed_rng(config.seed, _HABIT, user_index)
    n = len(config.station_map.stations)
    origin = int(rng.integers(n))
    destination = int(rng.integers(n - 1))
    if destination >= origin:  # habit pair is always a real journey
        destination += 1
    hour = int(rng.integers(24))
    return UserHabit(origin, destination, hour)


def _station_distance(station_map: StationMap, i: int, j: int) -> float:
    a = station_map.stations[i]
    b = station_map.stations[j]
    return math.hypot(a.x - b.x, a.y - b.y)


def generate_trips(config: GeneratorConfig) -> list[TripRecord]:
    """Exactly n_users * trips_per_user records, one user at a time.

    Each trip follows the user's habit with probability ``habit_strength``;
    otherwise endpoints and hour are uniform. Trips land on successive days so
    the log is ordered per user.
    """
    stations = config.station_map
    n_stations = len(stations.stations)
    trips = []
    for u in range(config.n_users):
        habit = user_habit(config, u)
        for j in range(config.trips_per_user):
            rng = keyed_rng(config.seed, _TRIP, u, j)
            if rng.random() < config.habit_strength:
                origin, dest, hour = habit.origin, habit.destination, habit.hour
            else:
                origin = int(rng.integers(n_stations))
                dest = int(rng.integers(n_stations))
                hour = int(rng.integers(24))
            leave = BASE_EPOCH + j * 86400 + hour * 3600 + int(rng.integers(3600))
            dist = _station_distance(stations, origin, dest)
            noise = math.exp(config.duration_noise_sigma * rng.standard_normal())
            duration = max(1, round(dist / config.speed_mps * noise))
            trips.append(
                TripRecord(
                    user_id=f"u{u}",
                    leave_station=stations.stations[origin].station_id,
                    leave_time=leave,
                    return_station=stations.stations[dest].station_id,
                    return_time=leave + duration,
                )
            )
    return trips


def _waypoints(
    rng: np.random.Generator, origin: tuple[float, float], dest: tuple[float, float]
) -> list[tuple[float, float]]:
    """1-3 intermediate points: lateral jitter off the straight line."""
    n_wp = int(rng.integers(1, 4))
    ox, oy = origin
    dx, dy = dest[0] - ox, dest[1] - oy
    length = math.hypot(dx, dy)
    if length > 0:
        px, py = -dy / length, dx / length  # unit perpendicular
    else:
        px, py = 1.0, 0.0
    points = []
    for k in range(1, n_wp + 1):
        f = k / (n_wp + 1)
        offset = rng.uniform(-0.15, 0.15) * max(length, 200.0)
        points.append((ox + f * dx + offset * px, oy + f * dy + offset * py))
    return points


def _path_position(path: list[tuple[float, float]], arc: float) -> tuple[float, float]:
    """Position after traveling ``arc`` meters along the piecewise-linear path."""
    remaining = arc
    for (x0, y0), (x1, y1) in zip(path, path[1:]):
        seg = math.hypot(x1 - x0, y1 - y0)
        if remaining <= seg or seg == 0.0:
            if seg == 0.0:
                continue
            f = remaining / seg
            return (x0 + f * (x1 - x0), y0 + f * (y1 - y0))
        remaining -= seg
    return path[-1]


def sample_times(leave: int, ret: int, period: float) -> list[int]:
    """Sample instants every ``period`` seconds, always including both ends.

    Timestamps are rounded to whole seconds; duplicates from sub-second
    periods collapse so the sequence stays strictly increasing.
    """
    times = [leave]
    k = 1
    while True:
        t = round(leave + k * period)
        if t >= ret:
            break
        if t > times[-1]:
            times.append(t)
        k += 1
    times.append(ret)
    return times


def generate_trajectories(
    config: GeneratorConfig, trips: list[TripRecord]
) -> list[GpsTrajectory]:
    """One GPS trajectory per trip along a seeded piecewise-linear path."""
    stations = config.station_map
    trajectories = []
    for idx, trip in enumerate(trips):
        trip.validate_against(stations)
        rng = keyed_rng(config.seed, _TRAJ, idx)
        origin = stations.get(trip.leave_station).position
        dest = stations.get(trip.return_station).position
        path = [origin, *_waypoints(rng, origin, dest), dest]
        total = sum(
            math.hypot(x1 - x0, y1 - y0) for (x0, y0), (x1, y1) in zip(path, path[1:])
        )
        times = sample_times(trip.leave_time, trip.return_time, config.gps_sample_period)
        duration = trip.duration
        points = []
        for t in times:
            if t == trip.leave_time:
                x, y = origin
            elif t == trip.return_time:
                x, y = dest
            else:
                arc = total * (t - trip.leave_time) / duration
                x, y = _path_position(path, arc)
            if config.gps_noise_std > 0:
                nx, ny = rng.normal(0.0, config.gps_noise_std, 2)
                x, y = x + nx, y + ny
            points.append((t, x, y))
        trajectories.append(
            GpsTrajectory(
                trip_id=f"t{idx}",
                points=tuple(points),
                destination=trip.return_station,
                arrival_time=trip.return_time,
            )
        )
    return trajectories
