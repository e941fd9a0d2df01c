import collections
import math

import numpy as np
import pytest

from bikeml import dataio
from bikeml.datagen import (
    GeneratorConfig,
    generate_trajectories,
    generate_trips,
    random_station_map,
    sample_times,
    user_habit,
)
from bikeml.errors import InvalidConfig


def config(**kw):
    defaults = dict(
        seed=42,
        station_map=random_station_map(42, 6),
        n_users=3,
        trips_per_user=10,
    )
    defaults.update(kw)
    return GeneratorConfig(**defaults)


class TestConfig:
    def test_habit_strength_bounds(self):
        with pytest.raises(InvalidConfig):
            config(habit_strength=1.5)

    def test_positive_counts(self):
        with pytest.raises(InvalidConfig):
            config(n_users=0)

    def test_speed_positive(self):
        with pytest.raises(InvalidConfig):
            config(speed_mps=0.0)


class TestGenerateTrips:
    def test_record_count(self):
        trips = generate_trips(config(n_users=4, trips_per_user=7))
        assert len(trips) == 28

    def test_full_habit_repeats_one_pair(self):
        cfg = config(habit_strength=1.0, n_users=1, trips_per_user=10)
        trips = generate_trips(cfg)
        pairs = {(t.leave_station, t.return_station) for t in trips}
        assert len(pairs) == 1
        habit = user_habit(cfg, 0)
        sm = cfg.station_map
        assert pairs == {
            (sm.stations[habit.origin].station_id, sm.stations[habit.destination].station_id)
        }

    def test_zero_habit_destinations_uniform(self):
        # chi-square style check: each station's count within 3 sigma of n*p
        cfg = config(seed=9, habit_strength=0.0, n_users=20, trips_per_user=200)
        trips = generate_trips(cfg)
        counts = collections.Counter(t.return_station for t in trips)
        n = len(trips)
        p = 1.0 / len(cfg.station_map.stations)
        sigma = math.sqrt(n * p * (1 - p))
        for sid in cfg.station_map.ids:
            assert abs(counts[sid] - n * p) < 3 * sigma

    def test_same_seed_byte_identical_csv(self):
        cfg = config()
        a = dataio.serialize_trip_log(generate_trips(cfg))
        b = dataio.serialize_trip_log(generate_trips(cfg))
        assert a == b

    def test_different_seed_differs(self):
        a = dataio.serialize_trip_log(generate_trips(config(seed=1)))
        b = dataio.serialize_trip_log(generate_trips(config(seed=2)))
        assert a != b

    def test_records_satisfy_domain_invariants(self):
        cfg = config(habit_strength=0.3)
        for trip in generate_trips(cfg):
            trip.validate_against(cfg.station_map)
            assert trip.duration >= 1

    def test_zero_noise_durations_exact(self):
        cfg = config(habit_strength=1.0, duration_noise_sigma=0.0, n_users=2)
        trips = generate_trips(cfg)
        for u in range(2):
            habit = user_habit(cfg, u)
            sm = cfg.station_map
            a = sm.stations[habit.origin]
            b = sm.stations[habit.destination]
            want = max(1, round(math.hypot(a.x - b.x, a.y - b.y) / cfg.speed_mps))
            durations = {t.duration for t in trips if t.user_id == f"u{u}"}
            assert durations == {want}

    def test_habit_majority_vote_recovers_destination(self):
        # with habit 1.0 a per-user majority vote must be perfectly accurate
        cfg = config(habit_strength=1.0, n_users=5, trips_per_user=20)
        trips = generate_trips(cfg)
        by_user = collections.defaultdict(list)
        for t in trips:
            by_user[t.user_id].append(t.return_station)
        for dests in by_user.values():
            majority = collections.Counter(dests).most_common(1)[0][0]
            assert all(d == majority for d in dests)


class TestGenerateTrajectories:
    def test_one_per_trip_with_ground_truth(self):
        cfg = config()
        trips = generate_trips(cfg)
        trajs = generate_trajectories(cfg, trips)
        assert len(trajs) == len(trips)
        for trip, traj in zip(trips, trajs):
            assert traj.destination == trip.return_station
            assert traj.arrival_time == trip.return_time
            assert traj.points[0][0] == trip.leave_time
            assert traj.points[-1][0] == trip.return_time

    def test_zero_noise_endpoints_exact(self):
        cfg = config(gps_noise_std=0.0)
        trips = generate_trips(cfg)
        for trip, traj in zip(trips, generate_trajectories(cfg, trips)):
            origin = cfg.station_map.get(trip.leave_station).position
            dest = cfg.station_map.get(trip.return_station).position
            assert traj.points[0][1:] == origin
            assert traj.points[-1][1:] == dest

    def test_sample_period_equal_to_duration_gives_two_points(self):
        assert sample_times(1000, 1600, 600.0) == [1000, 1600]

    def test_sample_times_strictly_increasing(self):
        times = sample_times(0, 100, 0.4)
        assert all(b > a for a, b in zip(times, times[1:]))
        assert times[0] == 0 and times[-1] == 100

    def test_terminal_noise_matches_rayleigh_mean(self):
        # Monte-Carlo oracle: E||N(0, s^2 I_2)|| = s * sqrt(pi/2)
        sigma = 12.0
        cfg = config(
            seed=1234,
            n_users=10,
            trips_per_user=100,
            gps_noise_std=sigma,
            habit_strength=0.0,
        )
        trips = generate_trips(cfg)
        trajs = generate_trajectories(cfg, trips)
        assert len(trajs) == 1000
        errs = []
        for trip, traj in zip(trips, trajs):
            dest = cfg.station_map.get(trip.return_station).position
            _, x, y = traj.points[-1]
            errs.append(math.hypot(x - dest[0], y - dest[1]))
        expected = sigma * math.sqrt(math.pi / 2)
        assert 0.8 * expected < np.mean(errs) < 1.2 * expected

    def test_determinism(self):
        cfg = config()
        trips = generate_trips(cfg)
        a = dataio.serialize_trajectories(generate_trajectories(cfg, trips))
        b = dataio.serialize_trajectories(generate_trajectories(cfg, trips))
        assert a == b
