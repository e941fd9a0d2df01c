"""Attributed feature model of the Status subsystem and product ranking.

The tree is one root with mandatory/optional leaves (the stock model has
AllBikesNow mandatory plus the optional LocationPreview and UserProfile).
Predictive features carry measured attributes copied from final hold-out
evaluation reports, and products are ranked by a transparent linear
cost-performance score.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .errors import InvalidModel, InvalidWeights, MalformedRow, MissingReport

ALL_BIKES_NOW = "AllBikesNow"
LOCATION_PREVIEW = "LocationPreview"
USER_PROFILE = "UserProfile"

DEFAULT_MAE_HORIZON = 1800.0  # seconds; normalizes mae into a score term


@dataclass(frozen=True)
class Feature:
    name: str
    mandatory: bool
    cost: float
    predictive: bool = False
    accuracy: float | None = None
    mae_seconds: float | None = None
    report_id: str | None = None


@dataclass(frozen=True)
class FeatureModel:
    root: str
    features: tuple[Feature, ...]
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise InvalidModel("feature names must be unique")
        for f in self.features:
            if f.cost < 0:
                raise InvalidModel(f"feature {f.name} has negative cost")
            if f.accuracy is not None and not 0.0 <= f.accuracy <= 1.0:
                raise InvalidModel(f"feature {f.name} accuracy outside [0, 1]")
            if f.mae_seconds is not None and f.mae_seconds < 0:
                raise InvalidModel(f"feature {f.name} has negative mae")

    def feature(self, name: str) -> Feature:
        for f in self.features:
            if f.name == name:
                return f
        raise InvalidModel(f"no feature named {name!r}")


def status_feature_model(
    cost_all_bikes_now: float = 0.0,
    cost_location_preview: float = 0.0,
    cost_user_profile: float = 0.0,
) -> FeatureModel:
    """The stock Status subsystem: one mandatory feature, two optional
    predictive ones."""
    return FeatureModel(
        root="Status",
        features=(
            Feature(ALL_BIKES_NOW, mandatory=True, cost=cost_all_bikes_now),
            Feature(LOCATION_PREVIEW, mandatory=False, cost=cost_location_preview, predictive=True),
            Feature(USER_PROFILE, mandatory=False, cost=cost_user_profile, predictive=True),
        ),
    )


@dataclass(frozen=True)
class ProductConfiguration:
    selected_features: tuple[str, ...]
    total_cost: float
    performance: dict[str, dict]
    tradeoff_score: float | None = None


def enumerate_products(model: FeatureModel) -> list[ProductConfiguration]:
    """Every valid selection: all mandatory features plus any subset of the
    optional ones, ordered by size then lexicographically."""
    mandatory = [f for f in model.features if f.mandatory]
    optional = [f for f in model.features if not f.mandatory]
    products = []
    for bits in range(2 ** len(optional)):
        chosen = mandatory + [f for i, f in enumerate(optional) if bits >> i & 1]
        names = tuple(sorted(f.name for f in chosen))
        performance = {
            f.name: {"accuracy": f.accuracy, "mae_seconds": f.mae_seconds}
            for f in chosen
            if f.predictive
        }
        products.append(
            ProductConfiguration(
                selected_features=names,
                total_cost=sum(f.cost for f in chosen),
                performance=performance,
            )
        )
    products.sort(key=lambda p: (len(p.selected_features), p.selected_features))
    return products


def attach_measurements(model: FeatureModel, reports: dict[str, dict]) -> FeatureModel:
    """Copy final hold-out metrics onto the predictive features.

    Only ``final_test_metrics`` counts (never CV means); the report id is
    kept as provenance. A report must exist for every predictive feature.
    Reports measured on different station sets only add a warning, since the
    numbers may not be comparable across deployments.
    """
    features = []
    fingerprints = {}
    for f in model.features:
        if not f.predictive:
            features.append(f)
            continue
        if f.name not in reports:
            raise MissingReport(f"no evaluation report for feature {f.name}")
        doc = reports[f.name]
        try:
            metrics = doc["final_test_metrics"]
            accuracy = metrics["overall_accuracy"]
            mae_seconds = metrics["mae_seconds"]
            report_id = doc["report_id"]
        except KeyError as e:
            raise MissingReport(
                f"report for {f.name} lacks final test metrics ({e.args[0]})"
            ) from None
        if "station_fingerprint" in doc:
            fingerprints[f.name] = doc["station_fingerprint"]
        features.append(
            replace(
                f,
                accuracy=float(accuracy),
                mae_seconds=float(mae_seconds),
                report_id=str(report_id),
            )
        )
    warnings = list(model.warnings)
    if len(set(fingerprints.values())) > 1:
        warnings.append(
            "measured attributes come from different station maps: "
            + ", ".join(f"{k}={v[:12]}" for k, v in sorted(fingerprints.items()))
        )
    return FeatureModel(model.root, tuple(features), tuple(warnings))


def rank_products(
    products: list[ProductConfiguration],
    weights: tuple[float, float, float],
    mae_horizon: float = DEFAULT_MAE_HORIZON,
) -> list[ProductConfiguration]:
    """Order products by w_acc * mean accuracy - w_mae * normalized mae
    - w_cost * normalized cost; ties go to the cheaper, then lexicographic,
    product."""
    w_acc, w_mae, w_cost = weights
    if w_acc < 0 or w_mae < 0 or w_cost < 0 or (w_acc == 0 and w_mae == 0 and w_cost == 0):
        raise InvalidWeights("weights must be nonnegative and not all zero")
    if mae_horizon <= 0:
        raise InvalidWeights("mae_horizon must be positive")
    max_cost = max((p.total_cost for p in products), default=0.0)
    scored = []
    for p in products:
        accs = []
        maes = []
        for name, perf in p.performance.items():
            if perf["accuracy"] is None or perf["mae_seconds"] is None:
                raise MissingReport(f"feature {name} has no measured attributes")
            accs.append(perf["accuracy"])
            maes.append(perf["mae_seconds"])
        acc_term = sum(accs) / len(accs) if accs else 0.0
        mae_term = (sum(maes) / len(maes)) / mae_horizon if maes else 0.0
        cost_term = p.total_cost / max_cost if max_cost > 0 else 0.0
        score = w_acc * acc_term - w_mae * mae_term - w_cost * cost_term
        scored.append(replace(p, tradeoff_score=score))
    scored.sort(key=lambda p: (-p.tradeoff_score, p.total_cost, p.selected_features))
    return scored


# ---------------------------------------------------------------------------
# File format


def serialize_feature_model(model: FeatureModel) -> str:
    doc = {
        "format": "bikeml-feature-model",
        "version": 1,
        "root": model.root,
        "features": [
            {
                "name": f.name,
                "mandatory": f.mandatory,
                "cost": f.cost,
                "predictive": f.predictive,
            }
            for f in model.features
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def parse_feature_model(text: str | bytes) -> FeatureModel:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedRow(e.lineno, f"invalid JSON: {e.msg}") from None
    if not isinstance(doc, dict) or doc.get("format") != "bikeml-feature-model":
        raise InvalidModel("not a feature-model file")
    try:
        features = tuple(
            Feature(
                name=f["name"],
                mandatory=bool(f["mandatory"]),
                cost=float(f["cost"]),
                predictive=bool(f.get("predictive", False)),
            )
            for f in doc["features"]
        )
        return FeatureModel(root=doc["root"], features=features)
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidModel(f"bad feature-model file: {e}") from None
