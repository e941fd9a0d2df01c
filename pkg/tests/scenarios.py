"""Shared trajectory scenario: two destinations whose paths share a trunk,
then cross mid-way so a single late GPS fix is ambiguous but the path
history is not. Used by the sequential-learner tests and the acceptance
suite."""

import numpy as np

from bikeml.domain import GpsTrajectory, Station, StationMap

FORK_STATIONS = StationMap(
    (
        Station("origin", 0.0, 0.0, 20),
        Station("north", 2000.0, 300.0, 20),
        Station("south", 2000.0, -300.0, 20),
        Station("depot", 100.0, 2500.0, 20),
    )
)

# trunk to (1000, 0), then a dip-then-rise branch to "north" and its mirror
# image to "south"; the branches cross near 80 percent of the path
_FORK_PATHS = {
    "north": [(0.0, 0.0), (1000.0, 0.0), (1500.0, -150.0), (2000.0, 300.0)],
    "south": [(0.0, 0.0), (1000.0, 0.0), (1500.0, 150.0), (2000.0, -300.0)],
}
FORK_SPEED_MPS = 5.0
FORK_SAMPLE_PERIOD = 10
FORK_NOISE_STD = 30.0
FORK_INPUT_SCALING = 0.02


def _path_position(path, arc):
    remaining = arc
    for (x0, y0), (x1, y1) in zip(path, path[1:]):
        seg = float(np.hypot(x1 - x0, y1 - y0))
        if remaining <= seg:
            f = remaining / seg
            return (x0 + f * (x1 - x0), y0 + f * (y1 - y0))
        remaining -= seg
    return path[-1]


def fork_trajectories(n: int, seed: int, noise_std: float = FORK_NOISE_STD):
    """n labeled trajectories alternating between the two destinations."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        dest = ("north", "south")[i % 2]
        path = _FORK_PATHS[dest]
        total = sum(
            float(np.hypot(x1 - x0, y1 - y0))
            for (x0, y0), (x1, y1) in zip(path, path[1:])
        )
        duration = int(round(total / FORK_SPEED_MPS))
        t0 = 1_700_000_000 + i * 10_000
        times = list(range(t0, t0 + duration, FORK_SAMPLE_PERIOD)) + [t0 + duration]
        points = []
        for t in times:
            x, y = _path_position(path, total * (t - t0) / duration)
            nx, ny = rng.normal(0.0, noise_std, 2)
            points.append((t, x + nx, y + ny))
        out.append(
            GpsTrajectory(
                f"fork{i}", tuple(points), destination=dest, arrival_time=t0 + duration
            )
        )
    return out


def strip_ground_truth(traj: GpsTrajectory) -> GpsTrajectory:
    return GpsTrajectory(traj.trip_id, traj.points)
