"""Per-user static learners behind the UserProfile feature.

A destination classifier (naive Bayes or logistic regression) and a
trip-duration ridge regressor are trained as two separate models per user,
plus the encoding utilities they share and the run-time retraining registry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .domain import StationMap, TripRecord
from .errors import (
    DimensionMismatch,
    EmptyVector,
    IndexOutOfRange,
    InsufficientData,
    NegativeComponent,
    NonFiniteLoss,
    SingularSystem,
)

SECONDS_PER_DAY = 86400
# 1970-01-01 was a Thursday; shift so Monday is day 0.
_EPOCH_DOW = 3

NAIVE_BAYES = "naive-bayes"
LOGISTIC_REGRESSION = "logistic-regression"

# Gaussian variance floor, relative to the largest feature variance.
_VAR_SMOOTHING = 1e-9


def one_of_k(label_index: int, k: int) -> np.ndarray:
    """Length-k binary vector with a single 1 at ``label_index``."""
    if not 0 <= label_index < k:
        raise IndexOutOfRange(f"index {label_index} outside [0, {k})")
    out = np.zeros(k)
    out[label_index] = 1.0
    return out


def softmax_normalize(scores) -> np.ndarray:
    """Turn nonnegative scores into probabilities by dividing by their sum.

    The all-zero vector maps to the uniform distribution. Negative
    components are a caller bug and raise.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise EmptyVector("cannot normalize an empty score vector")
    if np.any(scores < 0):
        raise NegativeComponent("scores must be nonnegative")
    total = scores.sum()
    if total == 0.0:
        return np.full(scores.size, 1.0 / scores.size)
    return scores / total


def time_of_day_features(t: int) -> tuple[float, float]:
    """(sin, cos) of the time of day over a 24 h cycle; midnight is (0, 1)."""
    angle = 2.0 * math.pi * (t % SECONDS_PER_DAY) / SECONDS_PER_DAY
    return (math.sin(angle), math.cos(angle))


def day_of_week_index(t: int) -> int:
    """0 = Monday ... 6 = Sunday, in UTC."""
    return (t // SECONDS_PER_DAY + _EPOCH_DOW) % 7


def static_input_dim(station_map: StationMap) -> int:
    return len(station_map.stations) + 2 + 7


def encode_trip_input(trip: TripRecord, station_map: StationMap) -> np.ndarray:
    """Features from the leave fields: station one-hot, time sin/cos, weekday one-hot."""
    n = len(station_map.stations)
    station = one_of_k(station_map.index_of(trip.leave_station), n)
    sin_t, cos_t = time_of_day_features(trip.leave_time)
    dow = one_of_k(day_of_week_index(trip.leave_time), 7)
    return np.concatenate([station, [sin_t, cos_t], dow])


def trip_feature_binary_mask(station_map: StationMap) -> np.ndarray:
    """Which encode_trip_input columns are 0/1 indicators (vs continuous)."""
    n = len(station_map.stations)
    mask = np.ones(n + 2 + 7, dtype=bool)
    mask[n] = mask[n + 1] = False  # the sin/cos pair
    return mask


# ---------------------------------------------------------------------------
# Classifiers


@dataclass
class ClassifierModel:
    kind: str
    class_labels: list[str]
    hyperparameters: dict

    def raw_scores(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass
class NaiveBayesModel(ClassifierModel):
    """Hybrid naive Bayes: Bernoulli indicators (Laplace-smoothed) plus
    per-class Gaussians for continuous columns."""

    binary_columns: np.ndarray  # bool mask over feature columns
    log_prior: np.ndarray  # (K,)
    bern_log_p: np.ndarray  # (K, n_binary), log P(col = 1 | class)
    bern_log_q: np.ndarray  # (K, n_binary), log P(col = 0 | class)
    gauss_mean: np.ndarray  # (K, n_continuous)
    gauss_var: np.ndarray  # (K, n_continuous)

    @property
    def priors(self) -> np.ndarray:
        return np.exp(self.log_prior)

    def log_joint(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.binary_columns.size:
            raise DimensionMismatch(
                f"expected {self.binary_columns.size} features, got {x.shape[-1]}"
            )
        xb = x[self.binary_columns]
        xc = x[~self.binary_columns]
        out = self.log_prior + self.bern_log_p @ xb + self.bern_log_q @ (1.0 - xb)
        if xc.size:
            out = out - 0.5 * np.sum(
                np.log(2.0 * math.pi * self.gauss_var)
                + (xc - self.gauss_mean) ** 2 / self.gauss_var,
                axis=1,
            )
        return out

    def raw_scores(self, x: np.ndarray) -> np.ndarray:
        lj = self.log_joint(x)
        return np.exp(lj - lj.max())


@dataclass
class LogisticRegressionModel(ClassifierModel):
    weights: np.ndarray  # (K, d)
    bias: np.ndarray  # (K,)
    n_iterations: int = 0

    def raw_scores(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.weights.shape[1]:
            raise DimensionMismatch(
                f"expected {self.weights.shape[1]} features, got {x.shape[-1]}"
            )
        z = self.weights @ x + self.bias
        return np.exp(z - z.max())


def _train_naive_bayes(x, y, class_labels, binary_columns, alpha):
    n, d = x.shape
    k = len(class_labels)
    if binary_columns is None:
        binary_columns = np.zeros(d, dtype=bool)
    binary_columns = np.asarray(binary_columns, dtype=bool)
    xb = x[:, binary_columns]
    xc = x[:, ~binary_columns]
    counts = np.bincount(y, minlength=k).astype(float)
    # priors are plain frequencies so absent classes keep probability 0;
    # Laplace smoothing applies to the feature likelihoods only
    with np.errstate(divide="ignore"):
        log_prior = np.log(counts / n)
    bern_log_p = np.empty((k, xb.shape[1]))
    bern_log_q = np.empty((k, xb.shape[1]))
    gauss_mean = np.zeros((k, xc.shape[1]))
    gauss_var = np.ones((k, xc.shape[1]))
    var_floor = _VAR_SMOOTHING * (np.max(np.var(xc, axis=0)) if xc.size else 1.0)
    var_floor = max(var_floor, 1e-12)
    for c in range(k):
        members = xb[y == c]
        ones = members.sum(axis=0) if members.size else np.zeros(xb.shape[1])
        n_c = counts[c]
        p = (ones + alpha) / (n_c + 2.0 * alpha)
        bern_log_p[c] = np.log(p)
        bern_log_q[c] = np.log(1.0 - p)
        members_c = xc[y == c]
        if members_c.shape[0] > 0:
            gauss_mean[c] = members_c.mean(axis=0)
            gauss_var[c] = members_c.var(axis=0) + var_floor
        else:
            gauss_var[c] = gauss_var[c] + var_floor
    return NaiveBayesModel(
        kind=NAIVE_BAYES,
        class_labels=list(class_labels),
        hyperparameters={"laplace_alpha": alpha},
        binary_columns=binary_columns,
        log_prior=log_prior,
        bern_log_p=bern_log_p,
        bern_log_q=bern_log_q,
        gauss_mean=gauss_mean,
        gauss_var=gauss_var,
    )


def train_classifier(
    x: np.ndarray,
    y: np.ndarray,
    class_labels: list[str],
    kind: str = NAIVE_BAYES,
    *,
    binary_columns: np.ndarray | None = None,
    l2: float = 0.0,
    learning_rate: float = 0.1,
    max_iters: int = 10000,
    tol: float = 1e-6,
    laplace_alpha: float = 1.0,
) -> ClassifierModel:
    """Fit a destination classifier on encoded inputs.

    ``y`` holds class indices into ``class_labels``; the label set stays the
    full station list so output dimensionality is stable even for classes
    unseen in training.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=int)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DimensionMismatch("x must be (n, d) with one label per row")
    n = x.shape[0]
    k = len(class_labels)
    if n == 0:
        raise InsufficientData("no training samples")
    if kind == NAIVE_BAYES:
        return _train_naive_bayes(x, y, class_labels, binary_columns, laplace_alpha)
    if kind == LOGISTIC_REGRESSION:
        if n < k:
            raise InsufficientData(
                f"logistic regression needs at least {k} samples, got {n}"
            )
        onehot = np.zeros((n, k))
        onehot[np.arange(n), y] = 1.0
        w, b, iters, status = kernels.logreg_fit(
            np.ascontiguousarray(x), onehot, l2, learning_rate, max_iters, tol
        )
        if status == kernels.LOGREG_NON_FINITE:
            raise NonFiniteLoss("logistic regression loss became non-finite")
        return LogisticRegressionModel(
            kind=LOGISTIC_REGRESSION,
            class_labels=list(class_labels),
            hyperparameters={
                "l2": l2,
                "learning_rate": learning_rate,
                "max_iters": max_iters,
                "tol": tol,
            },
            weights=np.ascontiguousarray(w.T),
            bias=b,
            n_iterations=iters,
        )
    raise ValueError(f"unknown classifier kind {kind!r}")


def predict_destination(model: ClassifierModel, x: np.ndarray) -> tuple[np.ndarray, str]:
    """Class probabilities plus the argmax station (ties: lowest class index)."""
    scores = model.raw_scores(np.asarray(x, dtype=float))
    probabilities = softmax_normalize(scores)
    return probabilities, model.class_labels[int(np.argmax(probabilities))]


# ---------------------------------------------------------------------------
# Duration regression


@dataclass
class RegressorModel:
    weights: np.ndarray  # (d,)
    bias: float
    ridge_lambda: float

    def predict(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.weights.size:
            raise DimensionMismatch(
                f"expected {self.weights.size} features, got {x.shape[-1]}"
            )
        return float(x @ self.weights + self.bias)


def train_regressor(x: np.ndarray, y: np.ndarray, ridge_lambda: float = 0.0) -> RegressorModel:
    """Closed-form ridge fit of y ~ w.x + b; the bias is not penalized."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DimensionMismatch("x must be (n, d) with one target per row")
    n, d = x.shape
    if n < 2:
        raise InsufficientData("ridge regression needs at least 2 samples")
    a = np.hstack([x, np.ones((n, 1))])
    m = a.T @ a
    m[np.arange(d), np.arange(d)] += ridge_lambda
    rhs = a.T @ y
    if ridge_lambda == 0.0 and np.linalg.matrix_rank(m) < d + 1:
        raise SingularSystem("design matrix is rank deficient and lambda is 0")
    try:
        theta = np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as e:
        raise SingularSystem(str(e)) from None
    return RegressorModel(weights=theta[:d], bias=float(theta[d]), ridge_lambda=ridge_lambda)


# ---------------------------------------------------------------------------
# Run-time retraining registry


def _fit_user_models(
    trips: list[TripRecord],
    station_map: StationMap,
    classifier_kind: str,
    classifier_hyper: dict,
    ridge_lambda: float,
) -> tuple[ClassifierModel, RegressorModel]:
    x = np.array([encode_trip_input(t, station_map) for t in trips])
    y = np.array([station_map.index_of(t.return_station) for t in trips])
    durations = np.array([t.duration for t in trips], dtype=float)
    classifier = train_classifier(
        x,
        y,
        station_map.ids,
        classifier_kind,
        binary_columns=trip_feature_binary_mask(station_map),
        **classifier_hyper,
    )
    regressor = train_regressor(x, durations, ridge_lambda)
    return classifier, regressor


@dataclass
class UserEntry:
    classifier: ClassifierModel | None = None
    regressor: RegressorModel | None = None
    n_trained_on: int = 0
    history: list[TripRecord] = field(default_factory=list)
    pending: list[TripRecord] = field(default_factory=list)

    @property
    def n_ingested(self) -> int:
        return len(self.history) + len(self.pending)


class UserModelRegistry:
    """Per-user models with batch retraining once enough new trips arrive.

    A user's models retrain on their full history whenever the pending
    buffer reaches ``retrain_threshold`` (the first training additionally
    waits for ``min_bootstrap`` trips). Until a user has models of their
    own, predictions fall back to a global pair trained on everyone's trips
    under the same policy.
    """

    def __init__(
        self,
        station_map: StationMap,
        retrain_threshold: int = 50,
        min_bootstrap: int = 20,
        classifier_kind: str = NAIVE_BAYES,
        classifier_hyper: dict | None = None,
        ridge_lambda: float = 1e-6,
    ):
        if retrain_threshold < 1 or min_bootstrap < 1:
            raise ValueError("thresholds must be positive")
        self.station_map = station_map
        self.retrain_threshold = retrain_threshold
        self.min_bootstrap = min_bootstrap
        self.classifier_kind = classifier_kind
        self.classifier_hyper = classifier_hyper or {}
        self.ridge_lambda = ridge_lambda
        self.users: dict[str, UserEntry] = {}
        self._global = UserEntry()

    def _maybe_retrain(self, entry: UserEntry, trips: list[TripRecord]) -> None:
        due = len(entry.pending) >= self.retrain_threshold
        bootstrap_ok = entry.n_ingested >= self.min_bootstrap
        if due and bootstrap_ok:
            entry.classifier, entry.regressor = _fit_user_models(
                trips,
                self.station_map,
                self.classifier_kind,
                self.classifier_hyper,
                self.ridge_lambda,
            )
            entry.history.extend(entry.pending)
            entry.pending.clear()
            entry.n_trained_on = len(entry.history)

    def ingest(self, trip: TripRecord) -> None:
        trip.validate_against(self.station_map)
        entry = self.users.setdefault(trip.user_id, UserEntry())
        entry.pending.append(trip)
        self._maybe_retrain(entry, entry.history + entry.pending)
        self._global.pending.append(trip)
        self._maybe_retrain(self._global, self._global.history + self._global.pending)

    def models_for(self, user_id: str) -> tuple[ClassifierModel, RegressorModel]:
        entry = self.users.get(user_id)
        if entry is not None and entry.classifier is not None:
            return entry.classifier, entry.regressor
        if self._global.classifier is not None:
            return self._global.classifier, self._global.regressor
        raise InsufficientData(
            f"no model for user {user_id!r} and the global model is untrained"
        )

    def predict(
        self, user_id: str, leave_station: str, leave_time: int
    ) -> tuple[np.ndarray, str, int]:
        """Destination probabilities, argmax station, expected return time."""
        classifier, regressor = self.models_for(user_id)
        probe = TripRecord(user_id, leave_station, leave_time, leave_station, leave_time + 1)
        x = encode_trip_input(probe, self.station_map)
        probabilities, label = predict_destination(classifier, x)
        duration = max(0.0, regressor.predict(x))
        return probabilities, label, leave_time + round(duration)
