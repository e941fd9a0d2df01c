"""Echo-state-network learners behind the LocationPreview feature.

A sparsely connected random reservoir with leaky tanh units runs over GPS
trajectory features; only the linear readout (destination scores plus one
remaining-time output) is trained, by closed-form ridge regression. A
sliding-window static classifier provides the baseline comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .domain import GpsTrajectory, StationMap
from .errors import (
    DimensionMismatch,
    InsufficientData,
    SingularSystem,
    SpectralRadiusFailure,
    UntrainedModel,
)
from .static import (
    ClassifierModel,
    NAIVE_BAYES,
    predict_destination,
    softmax_normalize,
    train_classifier,
)

N_MOTION_FEATURES = 5  # dx, dy, speed, heading sin, heading cos


@dataclass(frozen=True)
class ReservoirConfig:
    n_reservoir: int = 100
    spectral_radius: float = 0.9
    connectivity: float = 0.1
    input_scaling: float = 1.0
    leak_rate: float = 0.3
    ridge_lambda: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.n_reservoir < 1:
            raise ValueError("n_reservoir must be positive")
        if not 0.0 < self.spectral_radius < 1.0:
            raise ValueError("spectral_radius must be in (0, 1)")
        if not 0.0 < self.connectivity <= 1.0:
            raise ValueError("connectivity must be in (0, 1]")
        if self.input_scaling <= 0:
            raise ValueError("input_scaling must be positive")
        if not 0.0 < self.leak_rate <= 1.0:
            raise ValueError("leak_rate must be in (0, 1]")
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be nonnegative")


@dataclass(frozen=True)
class EsnModel:
    config: ReservoirConfig
    class_labels: tuple[str, ...]
    input_dim: int
    w_in: np.ndarray  # (n_reservoir, input_dim + 1), bias in column 0
    w: np.ndarray  # (n_reservoir, n_reservoir), fixed after init
    w_out: np.ndarray  # (K + 1, n_reservoir + input_dim + 1)
    trained: bool = False

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)


def spectral_radius(w: np.ndarray) -> float:
    """Largest eigenvalue modulus of the recurrent matrix."""
    return float(np.max(np.abs(np.linalg.eigvals(w))))


def init_reservoir(
    config: ReservoirConfig, input_dim: int, class_labels: list[str]
) -> EsnModel:
    """Draw the fixed random weights; only w_out will ever be trained.

    Recurrent entries are nonzero with probability ``connectivity`` and
    uniform in [-1, 1] before the whole matrix is rescaled to the target
    spectral radius.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_reservoir
    w = rng.uniform(-1.0, 1.0, (n, n))
    w[rng.random((n, n)) > config.connectivity] = 0.0
    radius = spectral_radius(w)
    if not np.isfinite(radius) or radius < 1e-12:
        raise SpectralRadiusFailure(
            f"cannot rescale a reservoir with spectral radius {radius}"
        )
    w *= config.spectral_radius / radius
    w_in = config.input_scaling * rng.uniform(-1.0, 1.0, (n, input_dim + 1))
    k = len(class_labels)
    return EsnModel(
        config=config,
        class_labels=tuple(class_labels),
        input_dim=input_dim,
        w_in=w_in,
        w=w,
        w_out=np.zeros((k + 1, n + input_dim + 1)),
    )


def reservoir_step(model: EsnModel, state: np.ndarray, u: np.ndarray) -> np.ndarray:
    """One leaky-integrator update: (1-a)*state + a*tanh(W_in.[1;u] + W.state)."""
    state = np.asarray(state, dtype=float)
    u = np.asarray(u, dtype=float)
    if state.size != model.config.n_reservoir or u.size != model.input_dim:
        raise DimensionMismatch(
            f"expected state {model.config.n_reservoir} / input {model.input_dim}, "
            f"got {state.size} / {u.size}"
        )
    a = model.config.leak_rate
    pre = model.w_in @ np.concatenate([[1.0], u]) + model.w @ state
    return (1.0 - a) * state + a * np.tanh(pre)


def sequence_features(traj: GpsTrajectory, station_map: StationMap) -> np.ndarray:
    """Per-step features: step vector (m), speed (m/s), heading sin/cos, and
    the distance to every station (km). The first step carries zero motion."""
    pts = traj.points
    n_steps = len(pts)
    positions = np.array([[p[1], p[2]] for p in pts])
    times = np.array([p[0] for p in pts], dtype=float)
    station_xy = np.array([[s.x, s.y] for s in station_map.stations])
    out = np.zeros((n_steps, N_MOTION_FEATURES + len(station_map.stations)))
    deltas = np.diff(positions, axis=0)
    dts = np.diff(times)
    norms = np.hypot(deltas[:, 0], deltas[:, 1])
    out[1:, 0] = deltas[:, 0]
    out[1:, 1] = deltas[:, 1]
    out[1:, 2] = norms / dts
    moving = norms > 0
    out[1:, 3][moving] = deltas[moving, 1] / norms[moving]
    out[1:, 4][moving] = deltas[moving, 0] / norms[moving]
    dists = np.sqrt(
        ((positions[:, None, :] - station_xy[None, :, :]) ** 2).sum(axis=2)
    )
    out[:, N_MOTION_FEATURES:] = dists / 1000.0
    return out


def _extended_states(model: EsnModel, features: np.ndarray) -> np.ndarray:
    """[state; input; 1] rows for every step of one feature sequence."""
    states = kernels.run_reservoir(
        model.w_in, model.w, model.config.leak_rate, np.ascontiguousarray(features)
    )
    ones = np.ones((features.shape[0], 1))
    return np.hstack([states, features, ones])


def train_esn(
    model: EsnModel, trajectories: list[GpsTrajectory], station_map: StationMap
) -> EsnModel:
    """Fit the readout on every step of every trajectory.

    Targets at each step are the one-hot destination (constant along the
    trajectory) and the remaining seconds to arrival; the readout solves one
    ridge system in closed form. Everything except w_out is untouched.
    """
    if not trajectories:
        raise InsufficientData("no training trajectories")
    k = model.n_classes
    label_index = {label: i for i, label in enumerate(model.class_labels)}
    g_blocks = []
    y_blocks = []
    for traj in trajectories:
        if not traj.has_ground_truth:
            raise InsufficientData(f"trajectory {traj.trip_id} lacks ground truth")
        features = sequence_features(traj, station_map)
        g_blocks.append(_extended_states(model, features))
        targets = np.zeros((features.shape[0], k + 1))
        targets[:, label_index[traj.destination]] = 1.0
        times = np.array([p[0] for p in traj.points], dtype=float)
        targets[:, k] = traj.arrival_time - times
        y_blocks.append(targets)
    g = np.vstack(g_blocks)
    y = np.vstack(y_blocks)
    lam = model.config.ridge_lambda
    m = g.T @ g + lam * np.eye(g.shape[1])
    if lam == 0.0 and np.linalg.matrix_rank(m) < g.shape[1]:
        raise SingularSystem("extended-state matrix is rank deficient and lambda is 0")
    try:
        w_out = np.linalg.solve(m, g.T @ y).T
    except np.linalg.LinAlgError as e:
        raise SingularSystem(str(e)) from None
    return replace(model, w_out=w_out, trained=True)


def predict_from_prefix(
    model: EsnModel,
    prefix: GpsTrajectory,
    station_map: StationMap,
    fraction_observed: float = 1.0,
) -> tuple[np.ndarray, int]:
    """Destination probabilities and expected arrival time from a partial path.

    The first ``fraction_observed`` of the points (at least 2) is run through
    the reservoir; class scores at the last step are clamped at zero and
    ratio-normalized, and the remaining-time output is clamped at zero.
    """
    if not model.trained:
        raise UntrainedModel("readout weights have not been trained")
    if not 0.0 < fraction_observed <= 1.0:
        raise ValueError("fraction_observed must be in (0, 1]")
    n_points = len(prefix.points)
    n_use = max(2, math.ceil(fraction_observed * n_points))
    truncated = GpsTrajectory(prefix.trip_id, prefix.points[:n_use])
    features = sequence_features(truncated, station_map)
    if features.shape[1] != model.input_dim:
        raise DimensionMismatch(
            f"expected input dim {model.input_dim}, got {features.shape[1]}"
        )
    g = _extended_states(model, features)[-1]
    out = model.w_out @ g
    k = model.n_classes
    probabilities = softmax_normalize(np.maximum(out[:k], 0.0))
    remaining = max(0.0, float(out[k]))
    last_time = truncated.points[-1][0]
    return probabilities, last_time + round(remaining)


# ---------------------------------------------------------------------------
# Sliding-window baseline


@dataclass
class WindowBaselineModel:
    classifier: ClassifierModel
    window_len: int
    station_map: StationMap


def _window_samples(features: np.ndarray, window_len: int) -> np.ndarray:
    """One flattened sample per step: the window ending there, zero-padded
    at the sequence start."""
    n_steps, n_feat = features.shape
    padded = np.vstack([np.zeros((window_len - 1, n_feat)), features])
    return np.stack(
        [padded[t : t + window_len].ravel() for t in range(n_steps)]
    )


def sliding_window_baseline(
    trajectories: list[GpsTrajectory],
    station_map: StationMap,
    window_len: int,
    static_kind: str = NAIVE_BAYES,
    **hyper,
) -> WindowBaselineModel:
    """Train a static classifier on fixed-size chunks slid over each sequence."""
    if window_len < 1:
        raise ValueError("window_len must be at least 1")
    if not trajectories:
        raise InsufficientData("no training trajectories")
    xs = []
    ys = []
    for traj in trajectories:
        if not traj.has_ground_truth:
            raise InsufficientData(f"trajectory {traj.trip_id} lacks ground truth")
        features = sequence_features(traj, station_map)
        xs.append(_window_samples(features, window_len))
        ys.append(np.full(features.shape[0], station_map.index_of(traj.destination)))
    classifier = train_classifier(
        np.vstack(xs), np.concatenate(ys), station_map.ids, static_kind, **hyper
    )
    return WindowBaselineModel(classifier, window_len, station_map)


def predict_window(
    model: WindowBaselineModel, prefix: GpsTrajectory, fraction_observed: float = 1.0
) -> tuple[np.ndarray, str]:
    """Classify a prefix from its last window only."""
    n_points = len(prefix.points)
    n_use = max(2, math.ceil(fraction_observed * n_points))
    truncated = GpsTrajectory(prefix.trip_id, prefix.points[:n_use])
    features = sequence_features(truncated, model.station_map)
    sample = _window_samples(features, model.window_len)[-1]
    return predict_destination(model.classifier, sample)
