"""Predictive features for a bike-sharing product line: per-user
destination/duration models, trajectory reservoir networks, the evaluation
protocol that measures them, and cost-performance ranking of the products
that bundle them."""

__version__ = "0.1.0"

from .domain import (
    GpsTrajectory,
    Pickup,
    Return,
    Station,
    StationMap,
    SystemState,
    TripRecord,
    all_bikes_now,
    apply_event,
)
from .datagen import GeneratorConfig, generate_trajectories, generate_trips, random_station_map
from .evaluation import class_accuracy, cross_validate, final_assessment, kfold_split, mae
from .featuremodel import (
    FeatureModel,
    attach_measurements,
    enumerate_products,
    rank_products,
    status_feature_model,
)
from .sequential import (
    EsnModel,
    ReservoirConfig,
    init_reservoir,
    predict_from_prefix,
    reservoir_step,
    sliding_window_baseline,
    train_esn,
)
from .static import (
    UserModelRegistry,
    encode_trip_input,
    one_of_k,
    predict_destination,
    softmax_normalize,
    train_classifier,
    train_regressor,
)

__all__ = [
    "GpsTrajectory",
    "Pickup",
    "Return",
    "Station",
    "StationMap",
    "SystemState",
    "TripRecord",
    "all_bikes_now",
    "apply_event",
    "GeneratorConfig",
    "generate_trajectories",
    "generate_trips",
    "random_station_map",
    "class_accuracy",
    "cross_validate",
    "final_assessment",
    "kfold_split",
    "mae",
    "FeatureModel",
    "attach_measurements",
    "enumerate_products",
    "rank_products",
    "status_feature_model",
    "EsnModel",
    "ReservoirConfig",
    "init_reservoir",
    "predict_from_prefix",
    "reservoir_step",
    "sliding_window_baseline",
    "train_esn",
    "UserModelRegistry",
    "encode_trip_input",
    "one_of_k",
    "predict_destination",
    "softmax_normalize",
    "train_classifier",
    "train_regressor",
]
