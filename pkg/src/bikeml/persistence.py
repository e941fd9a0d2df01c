"""Model and report files: self-describing JSON documents.

All floats go through Python's repr, so save -> load is exact on binary64
parameters. The ESN's recurrent matrix is stored sparsely as
(row, col, value) triples.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .dataio import parse_stations, serialize_stations
from .domain import StationMap
from .errors import SchemaMismatch
from .sequential import EsnModel, ReservoirConfig
from .static import (
    ClassifierModel,
    LOGISTIC_REGRESSION,
    LogisticRegressionModel,
    NAIVE_BAYES,
    NaiveBayesModel,
    RegressorModel,
)

FORMAT = "bikeml-model"
REPORT_FORMAT = "bikeml-report"
VERSION = 1


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def document_id(doc: dict) -> str:
    """Stable content hash over everything except the id field itself."""
    body = {k: v for k, v in doc.items() if k != "report_id"}
    return hashlib.sha256(canonical_json(body).encode()).hexdigest()


def data_fingerprint(serialized: str, n_samples: int) -> dict:
    return {
        "n_samples": n_samples,
        "sha256": hashlib.sha256(serialized.encode()).hexdigest(),
    }


def station_fingerprint(station_map: StationMap) -> str:
    return hashlib.sha256(serialize_stations(station_map).encode()).hexdigest()


def _require(doc: dict, key: str):
    try:
        return doc[key]
    except (KeyError, TypeError):
        raise SchemaMismatch(f"document lacks key {key!r}") from None


def _check_header(doc, expected_model: str) -> None:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise SchemaMismatch("not a bikeml model document")
    if doc.get("model") != expected_model:
        raise SchemaMismatch(
            f"expected a {expected_model} document, got {doc.get('model')!r}"
        )


# ---------------------------------------------------------------------------
# Static models


def classifier_to_doc(model: ClassifierModel, fingerprint: dict | None = None) -> dict:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "model": "classifier",
        "kind": model.kind,
        "class_labels": list(model.class_labels),
        "hyperparameters": model.hyperparameters,
    }
    if isinstance(model, NaiveBayesModel):
        doc["parameters"] = {
            "binary_columns": model.binary_columns.astype(int).tolist(),
            "log_prior": model.log_prior.tolist(),
            "bern_log_p": model.bern_log_p.tolist(),
            "bern_log_q": model.bern_log_q.tolist(),
            "gauss_mean": model.gauss_mean.tolist(),
            "gauss_var": model.gauss_var.tolist(),
        }
    elif isinstance(model, LogisticRegressionModel):
        doc["parameters"] = {
            "weights": model.weights.tolist(),
            "bias": model.bias.tolist(),
            "n_iterations": model.n_iterations,
        }
    else:
        raise SchemaMismatch(f"unknown classifier type {type(model).__name__}")
    if fingerprint:
        doc["fingerprint"] = fingerprint
    return doc


def classifier_from_doc(doc: dict) -> ClassifierModel:
    _check_header(doc, "classifier")
    kind = _require(doc, "kind")
    labels = list(_require(doc, "class_labels"))
    hyper = dict(doc.get("hyperparameters", {}))
    params = _require(doc, "parameters")
    if kind == NAIVE_BAYES:
        return NaiveBayesModel(
            kind=kind,
            class_labels=labels,
            hyperparameters=hyper,
            binary_columns=np.array(_require(params, "binary_columns"), dtype=bool),
            log_prior=np.array(_require(params, "log_prior"), dtype=float),
            bern_log_p=np.array(_require(params, "bern_log_p"), dtype=float),
            bern_log_q=np.array(_require(params, "bern_log_q"), dtype=float),
            gauss_mean=np.array(_require(params, "gauss_mean"), dtype=float),
            gauss_var=np.array(_require(params, "gauss_var"), dtype=float),
        )
    if kind == LOGISTIC_REGRESSION:
        return LogisticRegressionModel(
            kind=kind,
            class_labels=labels,
            hyperparameters=hyper,
            weights=np.array(_require(params, "weights"), dtype=float),
            bias=np.array(_require(params, "bias"), dtype=float),
            n_iterations=int(params.get("n_iterations", 0)),
        )
    raise SchemaMismatch(f"unknown classifier kind {kind!r}")


def regressor_to_doc(model: RegressorModel, fingerprint: dict | None = None) -> dict:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "model": "regressor",
        "parameters": {
            "weights": model.weights.tolist(),
            "bias": model.bias,
            "ridge_lambda": model.ridge_lambda,
        },
    }
    if fingerprint:
        doc["fingerprint"] = fingerprint
    return doc


def regressor_from_doc(doc: dict) -> RegressorModel:
    _check_header(doc, "regressor")
    params = _require(doc, "parameters")
    return RegressorModel(
        weights=np.array(_require(params, "weights"), dtype=float),
        bias=float(_require(params, "bias")),
        ridge_lambda=float(_require(params, "ridge_lambda")),
    )


# ---------------------------------------------------------------------------
# ESN


def esn_to_doc(
    model: EsnModel, station_map: StationMap, fingerprint: dict | None = None
) -> dict:
    rows, cols = np.nonzero(model.w)
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "model": "esn",
        "stations": json.loads(serialize_stations(station_map)),
        "config": {
            "n_reservoir": model.config.n_reservoir,
            "spectral_radius": model.config.spectral_radius,
            "connectivity": model.config.connectivity,
            "input_scaling": model.config.input_scaling,
            "leak_rate": model.config.leak_rate,
            "ridge_lambda": model.config.ridge_lambda,
            "seed": model.config.seed,
        },
        "class_labels": list(model.class_labels),
        "input_dim": model.input_dim,
        "trained": model.trained,
        "parameters": {
            "w_in": model.w_in.tolist(),
            "w_sparse": [
                [int(r), int(c), float(model.w[r, c])] for r, c in zip(rows, cols)
            ],
            "w_out": model.w_out.tolist(),
        },
    }
    if fingerprint:
        doc["fingerprint"] = fingerprint
    return doc


def esn_from_doc(doc: dict) -> tuple[EsnModel, StationMap]:
    _check_header(doc, "esn")
    station_map = parse_stations(json.dumps(_require(doc, "stations")))
    config = ReservoirConfig(**_require(doc, "config"))
    params = _require(doc, "parameters")
    n = config.n_reservoir
    w = np.zeros((n, n))
    for r, c, v in _require(params, "w_sparse"):
        w[int(r), int(c)] = v
    model = EsnModel(
        config=config,
        class_labels=tuple(_require(doc, "class_labels")),
        input_dim=int(_require(doc, "input_dim")),
        w_in=np.array(_require(params, "w_in"), dtype=float),
        w=w,
        w_out=np.array(_require(params, "w_out"), dtype=float),
        trained=bool(_require(doc, "trained")),
    )
    return model, station_map


# ---------------------------------------------------------------------------
# UserProfile bundle


def userprofile_bundle_to_doc(
    station_map: StationMap,
    global_models: tuple[ClassifierModel, RegressorModel],
    user_models: dict[str, tuple[ClassifierModel, RegressorModel]],
    fingerprint: dict | None = None,
) -> dict:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "model": "userprofile-bundle",
        "stations": json.loads(serialize_stations(station_map)),
        "global": {
            "classifier": classifier_to_doc(global_models[0]),
            "regressor": regressor_to_doc(global_models[1]),
        },
        "users": {
            uid: {
                "classifier": classifier_to_doc(clf),
                "regressor": regressor_to_doc(reg),
            }
            for uid, (clf, reg) in sorted(user_models.items())
        },
    }
    if fingerprint:
        doc["fingerprint"] = fingerprint
    return doc


def userprofile_bundle_from_doc(doc: dict):
    _check_header(doc, "userprofile-bundle")
    station_map = parse_stations(json.dumps(_require(doc, "stations")))
    glob = _require(doc, "global")
    global_models = (
        classifier_from_doc(_require(glob, "classifier")),
        regressor_from_doc(_require(glob, "regressor")),
    )
    users = {
        uid: (
            classifier_from_doc(_require(entry, "classifier")),
            regressor_from_doc(_require(entry, "regressor")),
        )
        for uid, entry in _require(doc, "users").items()
    }
    return station_map, global_models, users


# ---------------------------------------------------------------------------
# Text round trips


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def loads(text: str | bytes) -> dict:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaMismatch(f"invalid JSON: {e.msg} (line {e.lineno})") from None
