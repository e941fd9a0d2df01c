"""End-to-end training pipelines for the two predictive features.

UserProfile runs the three-step protocol once per user (destination
classifier and duration regressor separately) and pools the per-user
hold-out predictions into one report. LocationPreview runs it once over the
trajectory corpus with a reservoir hyperparameter grid.
"""

from __future__ import annotations

import collections
from dataclasses import replace

import numpy as np

from . import persistence
from .dataio import serialize_trajectories, serialize_trip_log
from .domain import GpsTrajectory, StationMap, TripRecord
from .errors import InsufficientData, TooFewSamples
from .evaluation import (
    CLASSIFICATION,
    REGRESSION,
    ModelFamily,
    classification_metrics,
    final_assessment,
    mae,
)
from .sequential import (
    EsnModel,
    ReservoirConfig,
    init_reservoir,
    predict_from_prefix,
    sequence_features,
    train_esn,
)
from .static import (
    NAIVE_BAYES,
    encode_trip_input,
    predict_destination,
    train_classifier,
    train_regressor,
    trip_feature_binary_mask,
)

DEFAULT_CLASSIFIER_GRID = [
    {"kind": "naive-bayes"},
    {"kind": "logistic-regression", "l2": 0.0},
    {"kind": "logistic-regression", "l2": 1e-3},
    {"kind": "logistic-regression", "l2": 1e-1},
]
# lambda 0 is excluded by default: one-hot columns for stations a user never
# visits make the normal equations singular without a ridge term
DEFAULT_REGRESSOR_GRID = [
    {"ridge_lambda": 1e-6},
    {"ridge_lambda": 1e-3},
    {"ridge_lambda": 1e-1},
]
DEFAULT_ESN_GRID = [
    {"input_scaling": 1.0},
    {"input_scaling": 0.1},
    {"input_scaling": 0.02},
]

# operating point at which LocationPreview models are scored: half the
# journey observed
DEFAULT_EVAL_FRACTION = 0.5


def _classifier_family(x, y, station_map: StationMap) -> ModelFamily:
    labels = station_map.ids
    mask = trip_feature_binary_mask(station_map)

    def fit(indices, setting):
        kw = dict(setting)
        kind = kw.pop("kind")
        return train_classifier(
            x[indices], y[indices], labels, kind, binary_columns=mask, **kw
        )

    def evaluate(model, indices):
        preds = [predict_destination(model, x[i])[1] for i in indices]
        truth = [labels[y[i]] for i in indices]
        return classification_metrics(preds, truth)

    return ModelFamily("destination-classifier", CLASSIFICATION, fit, evaluate)


def _regressor_family(x, durations) -> ModelFamily:
    def fit(indices, setting):
        return train_regressor(x[indices], durations[indices], **setting)

    def evaluate(model, indices):
        preds = [model.predict(x[i]) for i in indices]
        return {"mae_seconds": mae(preds, durations[indices])}

    return ModelFamily("duration-regressor", REGRESSION, fit, evaluate)


def group_trips_by_user(trips: list[TripRecord]) -> dict[str, list[TripRecord]]:
    by_user: dict[str, list[TripRecord]] = collections.defaultdict(list)
    for trip in trips:
        by_user[trip.user_id].append(trip)
    return dict(by_user)


def train_userprofile(
    trips: list[TripRecord],
    station_map: StationMap,
    k: int = 5,
    seed: int = 0,
    test_fraction: float = 0.2,
    classifier_grid: list[dict] | None = None,
    regressor_grid: list[dict] | None = None,
):
    """Per-user three-step training; returns (bundle_doc, report_doc).

    The report's final metrics pool every user's external hold-out
    predictions; per-user sub-reports keep the full CV breakdown and the
    disjoint index sets.
    """
    classifier_grid = classifier_grid or DEFAULT_CLASSIFIER_GRID
    regressor_grid = regressor_grid or DEFAULT_REGRESSOR_GRID
    by_user = group_trips_by_user(trips)
    if not by_user:
        raise InsufficientData("no trips to train on")
    labels = station_map.ids
    user_models = {}
    per_user_reports = {}
    pooled_preds = []
    pooled_truth = []
    pooled_abs_errors = []
    for uid, user_trips in by_user.items():
        x = np.array([encode_trip_input(t, station_map) for t in user_trips])
        y = np.array([station_map.index_of(t.return_station) for t in user_trips])
        durations = np.array([t.duration for t in user_trips], dtype=float)
        n = len(user_trips)
        n_test = round(n * test_fraction)
        if n - n_test < k:
            raise InsufficientData(
                f"user {uid}: {n} trips leave {n - n_test} for {k}-fold "
                "cross-validation"
            )
        try:
            clf_report, clf_model = final_assessment(
                _classifier_family(x, y, station_map),
                n,
                classifier_grid,
                k,
                seed,
                test_fraction,
                stratify_labels=y,
            )
            reg_report, reg_model = final_assessment(
                _regressor_family(x, durations), n, regressor_grid, k, seed, test_fraction
            )
        except (TooFewSamples, InsufficientData) as e:
            raise InsufficientData(f"user {uid}: {e}") from e
        user_models[uid] = (clf_model, reg_model)
        per_user_reports[uid] = {
            "classifier": clf_report.to_dict(),
            "regressor": reg_report.to_dict(),
        }
        for i in clf_report.test_indices:
            pooled_preds.append(predict_destination(clf_model, x[i])[1])
            pooled_truth.append(labels[y[i]])
        for i in reg_report.test_indices:
            pooled_abs_errors.append(abs(reg_model.predict(x[i]) - durations[i]))

    final_metrics = classification_metrics(pooled_preds, pooled_truth)
    final_metrics["mae_seconds"] = float(np.mean(pooled_abs_errors))

    # fallback pair for users unseen at training time
    all_x = np.vstack([encode_trip_input(t, station_map) for t in trips])
    all_y = np.array([station_map.index_of(t.return_station) for t in trips])
    all_dur = np.array([t.duration for t in trips], dtype=float)
    global_models = (
        train_classifier(
            all_x,
            all_y,
            labels,
            NAIVE_BAYES,
            binary_columns=trip_feature_binary_mask(station_map),
        ),
        train_regressor(all_x, all_dur, 1e-6),
    )

    fingerprint = persistence.data_fingerprint(serialize_trip_log(trips), len(trips))
    bundle_doc = persistence.userprofile_bundle_to_doc(
        station_map, global_models, user_models, fingerprint
    )
    selected_counts = collections.Counter(
        persistence.canonical_json(r["classifier"]["selected_hyperparameters"])
        for r in per_user_reports.values()
    )
    report_doc = {
        "format": persistence.REPORT_FORMAT,
        "version": persistence.VERSION,
        "feature": "userprofile",
        "model_descriptor": "per-user destination classifier + duration regressor",
        "k": k,
        "seed": seed,
        "test_fraction": test_fraction,
        "n_users": len(by_user),
        "n_samples": len(trips),
        "final_test_metrics": final_metrics,
        "selected_hyperparameters": {
            "classifier_selection_counts": dict(sorted(selected_counts.items())),
        },
        "per_user": per_user_reports,
        "station_fingerprint": persistence.station_fingerprint(station_map),
        "dataset_fingerprint": fingerprint,
        "warnings": [],
    }
    report_doc["report_id"] = persistence.document_id(report_doc)
    return bundle_doc, report_doc


def _esn_family(
    trajectories: list[GpsTrajectory],
    station_map: StationMap,
    base_config: ReservoirConfig,
    eval_fraction: float,
) -> ModelFamily:
    def fit(indices, setting):
        config = replace(base_config, **setting)
        input_dim = 5 + len(station_map.stations)
        model = init_reservoir(config, input_dim, station_map.ids)
        return train_esn(model, [trajectories[i] for i in indices], station_map)

    def evaluate(model, indices):
        preds = []
        truth = []
        eta_errors = []
        for i in indices:
            traj = trajectories[i]
            probe = GpsTrajectory(traj.trip_id, traj.points)
            probs, eta = predict_from_prefix(model, probe, station_map, eval_fraction)
            preds.append(model.class_labels[int(np.argmax(probs))])
            truth.append(traj.destination)
            eta_errors.append(abs(eta - traj.arrival_time))
        metrics = classification_metrics(preds, truth)
        metrics["mae_seconds"] = float(np.mean(eta_errors))
        return metrics

    return ModelFamily("trajectory-esn", CLASSIFICATION, fit, evaluate)


def train_locationpreview(
    trajectories: list[GpsTrajectory],
    station_map: StationMap,
    k: int = 5,
    seed: int = 0,
    test_fraction: float = 0.2,
    esn_grid: list[dict] | None = None,
    base_config: ReservoirConfig | None = None,
    eval_fraction: float = DEFAULT_EVAL_FRACTION,
):
    """Three-step training of the trajectory ESN; returns (esn_doc, report_doc).

    Models are scored at ``eval_fraction`` of each journey observed, which is
    the feature's operating regime (predict before arrival, not after).
    """
    esn_grid = esn_grid or DEFAULT_ESN_GRID
    base_config = base_config or ReservoirConfig(seed=seed)
    for traj in trajectories:
        if not traj.has_ground_truth:
            raise InsufficientData(f"trajectory {traj.trip_id} lacks ground truth")
    labels = [t.destination for t in trajectories]
    family = _esn_family(trajectories, station_map, base_config, eval_fraction)
    report, model = final_assessment(
        family,
        len(trajectories),
        esn_grid,
        k,
        seed,
        test_fraction,
        stratify_labels=labels,
    )
    fingerprint = persistence.data_fingerprint(
        serialize_trajectories(trajectories), len(trajectories)
    )
    esn_doc = persistence.esn_to_doc(model, station_map, fingerprint)
    report_doc = {
        "format": persistence.REPORT_FORMAT,
        "version": persistence.VERSION,
        "feature": "locationpreview",
        "model_descriptor": "trajectory reservoir classifier + arrival-time readout",
        "k": k,
        "seed": seed,
        "test_fraction": test_fraction,
        "eval_fraction": eval_fraction,
        "n_samples": len(trajectories),
        "final_test_metrics": report.final_test_metrics,
        "selected_hyperparameters": report.selected_hyperparameters,
        "cv": report.to_dict()["cv"],
        "train_indices": report.train_indices,
        "test_indices": report.test_indices,
        "station_fingerprint": persistence.station_fingerprint(station_map),
        "dataset_fingerprint": fingerprint,
        "warnings": [],
    }
    report_doc["report_id"] = persistence.document_id(report_doc)
    return esn_doc, report_doc


# ---------------------------------------------------------------------------
# Prediction entry points shared by the CLI and tests


def predict_userprofile_query(
    station_map: StationMap,
    global_models,
    user_models: dict,
    user_id: str,
    leave_station: str,
    leave_time: int,
) -> dict:
    """One query against a trained bundle; unknown users get the global pair."""
    classifier, regressor = user_models.get(user_id, global_models)
    probe = TripRecord(user_id, leave_station, leave_time, leave_station, leave_time + 1)
    x = encode_trip_input(probe, station_map)
    probabilities, label = predict_destination(classifier, x)
    duration = max(0.0, regressor.predict(x))
    return {
        "user_id": user_id,
        "leave_station": leave_station,
        "leave_time": leave_time,
        "probabilities": {
            sid: float(p) for sid, p in zip(classifier.class_labels, probabilities)
        },
        "predicted_station": label,
        "expected_return_time": leave_time + round(duration),
        "served_by": "user-model" if user_id in user_models else "global-model",
    }


def station_arrival_aggregate(results: list[dict], station_id: str) -> dict:
    """Chance that at least one of the queried trips ends at the station,
    treating trips as independent: 1 - prod(1 - p_i). An interpretation,
    not a calibrated probability."""
    miss = 1.0
    for r in results:
        miss *= 1.0 - r["probabilities"].get(station_id, 0.0)
    return {
        "station_id": station_id,
        "arrival_probability": 1.0 - miss,
        "n_trips_considered": len(results),
        "interpretation": "independent-trips aggregation 1 - prod(1 - p_i)",
    }
