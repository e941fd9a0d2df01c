"""Command-line entry point.

Subcommands: datagen, train, predict, status, rank, report. Every command
that writes files also writes a manifest (resolved configuration, seed,
input digests, tool version, kernel backend) next to them; re-running with
the same manifest reproduces the outputs byte for byte.

Exit codes: 0 success, 2 input or configuration problem, 3 insufficient
data, 4 model/query schema mismatch, 5 missing evaluation report.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, dataio, persistence, pipelines
from .datagen import GeneratorConfig, generate_trajectories, generate_trips, random_station_map
from .domain import GpsTrajectory, SystemState, all_bikes_now, apply_event
from .errors import (
    BikemlError,
    DimensionMismatch,
    IndexOutOfRange,
    InsufficientData,
    InvalidConfig,
    InvalidModel,
    InvalidWeights,
    MalformedRow,
    MissingReport,
    SchemaMismatch,
    TooFewSamples,
    UnknownStation,
    UntrainedModel,
)
from .featuremodel import attach_measurements, enumerate_products, parse_feature_model, rank_products
from .kernels import BACKEND
from .sequential import predict_from_prefix

EXIT_INPUT = 2
EXIT_DATA = 3
EXIT_SCHEMA = 4
EXIT_REPORT = 5

_EXIT_CODES = [
    ((MissingReport,), EXIT_REPORT),
    ((SchemaMismatch, UnknownStation, DimensionMismatch, UntrainedModel, IndexOutOfRange), EXIT_SCHEMA),
    ((InsufficientData, TooFewSamples), EXIT_DATA),
    ((InvalidConfig, MalformedRow, InvalidModel, InvalidWeights, BikemlError, ValueError), EXIT_INPUT),
]


def _exit_code(error: Exception) -> int:
    for types, code in _EXIT_CODES:
        if isinstance(error, types):
            return code
    return EXIT_INPUT


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_manifest(
    path: Path, command: str, config: dict, inputs: dict[str, Path], seed=None
) -> None:
    manifest = {
        "format": "bikeml-manifest",
        "version": 1,
        "command": command,
        "tool_version": __version__,
        "kernel_backend": BACKEND,
        "seed": seed,
        "config": config,
        "input_digests": {str(p): _sha256(p) for p in inputs.values()},
    }
    _write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _table(headers: list[str], rows: list[list]) -> str:
    cells = [headers] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = []
    for i, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _load_stations(path: Path):
    return dataio.parse_stations(path.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# datagen

_DATAGEN_DEFAULTS = {
    "seed": 0,
    "stations": None,
    "users": 10,
    "trips_per_user": 50,
    "habit_strength": 0.8,
    "speed_mps": 4.0,
    "gps_noise_std": 5.0,
    "gps_sample_period": 10.0,
    "duration_noise_sigma": 0.1,
}


def _cmd_datagen(args) -> int:
    resolved = dict(_DATAGEN_DEFAULTS)
    inputs = {}
    if args.config:
        config_path = Path(args.config)
        try:
            file_config = json.loads(config_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidConfig(f"cannot read config file {args.config}: {e}") from None
        unknown = set(file_config) - set(resolved)
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        resolved.update(file_config)
        inputs["config"] = config_path
    for key in _DATAGEN_DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
    if resolved["stations"] is None:
        raise InvalidConfig("--stations is required (a count or a stations file)")

    stations_value = str(resolved["stations"])
    if stations_value.isdigit():
        station_map = random_station_map(int(resolved["seed"]), int(stations_value))
    else:
        stations_path = Path(stations_value)
        if not stations_path.exists():
            raise InvalidConfig(f"stations file not found: {stations_value}")
        station_map = _load_stations(stations_path)
        inputs["stations"] = stations_path

    config = GeneratorConfig(
        seed=int(resolved["seed"]),
        station_map=station_map,
        n_users=int(resolved["users"]),
        trips_per_user=int(resolved["trips_per_user"]),
        habit_strength=float(resolved["habit_strength"]),
        speed_mps=float(resolved["speed_mps"]),
        gps_noise_std=float(resolved["gps_noise_std"]),
        gps_sample_period=float(resolved["gps_sample_period"]),
        duration_noise_sigma=float(resolved["duration_noise_sigma"]),
    )
    trips = generate_trips(config)
    trajectories = generate_trajectories(config, trips)
    out = Path(args.out_dir)
    _write(out / "stations.json", dataio.serialize_stations(station_map))
    _write(out / "trips.csv", dataio.serialize_trip_log(trips))
    _write(out / "trajectories.jsonl", dataio.serialize_trajectories(trajectories))
    _write_manifest(
        out / "manifest.json", "datagen", resolved, inputs, seed=int(resolved["seed"])
    )
    print(f"wrote {len(trips)} trips and {len(trajectories)} trajectories to {out}")
    return 0


# ---------------------------------------------------------------------------
# train


def _load_grid(path_str: str | None) -> dict:
    if not path_str:
        return {}
    path = Path(path_str)
    try:
        grid = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidConfig(f"cannot read grid file {path_str}: {e}") from None
    if not isinstance(grid, dict):
        raise InvalidConfig("grid file must hold an object of grids")
    return grid


def _cmd_train(args) -> int:
    stations_path = Path(args.stations)
    station_map = _load_stations(stations_path)
    grid = _load_grid(args.grid)
    out = Path(args.out_dir)
    config = {
        "feature": args.feature,
        "k": args.k,
        "seed": args.seed,
        "test_fraction": args.test_fraction,
    }
    inputs = {"stations": stations_path}
    if args.grid:
        inputs["grid"] = Path(args.grid)

    if args.feature == "userprofile":
        trips_path = Path(args.trips)
        inputs["trips"] = trips_path
        trips = dataio.parse_trip_log(trips_path.read_text(encoding="utf-8"))
        for trip in trips:
            trip.validate_against(station_map)
        bundle_doc, report_doc = pipelines.train_userprofile(
            trips,
            station_map,
            k=args.k,
            seed=args.seed,
            test_fraction=args.test_fraction,
            classifier_grid=grid.get("classifier"),
            regressor_grid=grid.get("regressor"),
        )
        model_path = out / "userprofile_model.json"
        report_path = out / "userprofile_report.json"
        _write(model_path, persistence.dumps(bundle_doc))
        _write(report_path, persistence.dumps(report_doc))
    else:
        traj_path = Path(args.trajectories)
        inputs["trajectories"] = traj_path
        trajectories = dataio.parse_trajectories(traj_path.read_text(encoding="utf-8"))
        config["eval_fraction"] = args.eval_fraction
        esn_doc, report_doc = pipelines.train_locationpreview(
            trajectories,
            station_map,
            k=args.k,
            seed=args.seed,
            test_fraction=args.test_fraction,
            esn_grid=grid.get("esn"),
            eval_fraction=args.eval_fraction,
        )
        model_path = out / "locationpreview_model.json"
        report_path = out / "locationpreview_report.json"
        _write(model_path, persistence.dumps(esn_doc))
        _write(report_path, persistence.dumps(report_doc))

    _write_manifest(out / "manifest.json", f"train {args.feature}", config, inputs, seed=args.seed)
    print(_format_report(report_doc), end="")
    print(f"model: {model_path}\nreport: {report_path}")
    return 0


# ---------------------------------------------------------------------------
# predict


def _cmd_predict(args) -> int:
    model_path = Path(args.model)
    doc = persistence.loads(model_path.read_text(encoding="utf-8"))
    results: list[dict] = []
    output: dict = {"feature": args.feature, "predictions": results}
    inputs = {"model": model_path}

    if args.feature == "userprofile":
        station_map, global_models, user_models = persistence.userprofile_bundle_from_doc(doc)
        query_path = Path(args.query)
        inputs["query"] = query_path
        queries = persistence.loads(query_path.read_text(encoding="utf-8"))
        if not isinstance(queries, list):
            raise SchemaMismatch("query file must hold a JSON list of queries")
        for q in queries:
            try:
                user_id = q["user_id"]
                leave_station = q["leave_station"]
                leave_time = int(q["leave_time"])
            except (TypeError, KeyError) as e:
                raise SchemaMismatch(f"query lacks key {e.args[0]!r}") from None
            if leave_station not in station_map:
                raise UnknownStation(f"query references unknown station {leave_station!r}")
            results.append(
                pipelines.predict_userprofile_query(
                    station_map, global_models, user_models, user_id, leave_station, leave_time
                )
            )
        if args.station_of_interest:
            if args.station_of_interest not in station_map:
                raise UnknownStation(
                    f"unknown station of interest {args.station_of_interest!r}"
                )
            output["station_arrival"] = pipelines.station_arrival_aggregate(
                results, args.station_of_interest
            )
    else:
        model, station_map = persistence.esn_from_doc(doc)
        traj_path = Path(args.trajectories)
        inputs["trajectories"] = traj_path
        trajectories = dataio.parse_trajectories(traj_path.read_text(encoding="utf-8"))
        for traj in trajectories:
            probe = GpsTrajectory(traj.trip_id, traj.points)
            probabilities, eta = predict_from_prefix(
                model, probe, station_map, args.fraction
            )
            results.append(
                {
                    "trip_id": traj.trip_id,
                    "fraction_observed": args.fraction,
                    "probabilities": {
                        sid: float(p)
                        for sid, p in zip(model.class_labels, probabilities)
                    },
                    "predicted_station": model.class_labels[int(np.argmax(probabilities))],
                    "expected_arrival_time": eta,
                }
            )

    text = json.dumps(output, indent=2) + "\n"
    if args.out:
        _write(Path(args.out), text)
        _write_manifest(
            Path(str(args.out) + ".manifest.json"),
            f"predict {args.feature}",
            {"feature": args.feature, "fraction": getattr(args, "fraction", None)},
            inputs,
        )
        print(f"wrote {len(results)} predictions to {args.out}")
    else:
        print(text, end="")
    return 0


# ---------------------------------------------------------------------------
# status


def _cmd_status(args) -> int:
    station_map = _load_stations(Path(args.stations))
    if args.docked:
        docked_doc = persistence.loads(Path(args.docked).read_text(encoding="utf-8"))
        if not isinstance(docked_doc, dict):
            raise SchemaMismatch("docked file must map station ids to bike lists")
        state = SystemState.with_bikes(
            station_map, {sid: list(bikes) for sid, bikes in docked_doc.items()}
        )
    else:
        state = SystemState.empty(station_map)
    events = dataio.parse_events(Path(args.events).read_text(encoding="utf-8"))
    for event in events:
        state = apply_event(state, event)
    counts = all_bikes_now(state)
    rows = [[sid, counts[sid]] for sid in station_map.ids]
    rows.append(["(in transit)", len(state.in_transit)])
    print(_table(["station", "bikes"], rows), end="")
    return 0


# ---------------------------------------------------------------------------
# rank


def _cmd_rank(args) -> int:
    model_path = Path(args.feature_model)
    model = parse_feature_model(model_path.read_text(encoding="utf-8"))
    inputs = {"feature_model": model_path}
    reports = {}
    for item in args.report or []:
        name, _, path_str = item.partition("=")
        if not path_str:
            raise InvalidConfig(f"--report expects NAME=PATH, got {item!r}")
        path = Path(path_str)
        reports[name] = persistence.loads(path.read_text(encoding="utf-8"))
        inputs[f"report:{name}"] = path
    attributed = attach_measurements(model, reports)
    for warning in attributed.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    weights = (args.w_acc, args.w_mae, args.w_cost)
    ranked = rank_products(
        enumerate_products(attributed), weights, mae_horizon=args.mae_horizon
    )
    rows = [
        [
            i + 1,
            "+".join(p.selected_features),
            f"{p.tradeoff_score:.6f}",
            f"{p.total_cost:.2f}",
        ]
        for i, p in enumerate(ranked)
    ]
    print(_table(["rank", "product", "score", "cost"], rows), end="")
    if args.out:
        doc = {
            "format": "bikeml-ranking",
            "version": 1,
            "weights": {"accuracy": args.w_acc, "mae": args.w_mae, "cost": args.w_cost},
            "mae_horizon": args.mae_horizon,
            "warnings": list(attributed.warnings),
            "products": [
                {
                    "rank": i + 1,
                    "selected_features": list(p.selected_features),
                    "tradeoff_score": p.tradeoff_score,
                    "total_cost": p.total_cost,
                    "performance": p.performance,
                }
                for i, p in enumerate(ranked)
            ],
        }
        _write(Path(args.out), json.dumps(doc, indent=2) + "\n")
        _write_manifest(
            Path(str(args.out) + ".manifest.json"),
            "rank",
            {
                "w_acc": args.w_acc,
                "w_mae": args.w_mae,
                "w_cost": args.w_cost,
                "mae_horizon": args.mae_horizon,
            },
            inputs,
        )
    return 0


# ---------------------------------------------------------------------------
# report


def _format_report(doc: dict) -> str:
    lines = [f"feature: {doc.get('feature', '?')}  ({doc.get('model_descriptor', '')})"]
    final = doc.get("final_test_metrics", {})
    rows = []
    if "overall_accuracy" in final:
        rows.append(["overall accuracy", f"{final['overall_accuracy']:.4f}"])
    if "mae_seconds" in final:
        rows.append(["mae (seconds)", f"{final['mae_seconds']:.2f}"])
    for label, acc in sorted(final.get("per_class_accuracy", {}).items()):
        rows.append([f"class accuracy [{label}]", f"{acc:.4f}"])
    lines.append(_table(["final test metric", "value"], rows).rstrip())
    if "selected_hyperparameters" in doc:
        lines.append(f"selected: {json.dumps(doc['selected_hyperparameters'], sort_keys=True)}")
    if doc.get("warnings"):
        lines.extend(f"warning: {w}" for w in doc["warnings"])
    lines.append(f"report id: {doc.get('report_id', '?')}")
    return "\n".join(lines) + "\n"


def _cmd_report(args) -> int:
    doc = persistence.loads(Path(args.report).read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or doc.get("format") != persistence.REPORT_FORMAT:
        raise SchemaMismatch("not a bikeml report document")
    print(_format_report(doc), end="")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bikeml",
        description="Train, evaluate, and rank predictive bike-sharing features.",
    )
    parser.add_argument("--version", action="version", version=f"bikeml {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", help="generate a synthetic trip log and GPS trajectories")
    p.add_argument("--config", help="JSON config file; flags override its entries")
    p.add_argument("--seed", type=int)
    p.add_argument("--stations", help="station count (seeded layout) or stations JSON path")
    p.add_argument("--users", type=int)
    p.add_argument("--trips-per-user", dest="trips_per_user", type=int)
    p.add_argument("--habit-strength", dest="habit_strength", type=float)
    p.add_argument("--speed-mps", dest="speed_mps", type=float)
    p.add_argument("--gps-noise-std", dest="gps_noise_std", type=float)
    p.add_argument("--gps-sample-period", dest="gps_sample_period", type=float)
    p.add_argument("--duration-noise-sigma", dest="duration_noise_sigma", type=float)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=_cmd_datagen)

    p = sub.add_parser("train", help="run the three-step protocol and persist model + report")
    p.add_argument("feature", choices=["userprofile", "locationpreview"])
    p.add_argument("--trips", help="trip log CSV (userprofile)")
    p.add_argument("--trajectories", help="trajectory JSONL (locationpreview)")
    p.add_argument("--stations", required=True, help="stations JSON path")
    p.add_argument("--grid", help="JSON file with hyperparameter grids")
    p.add_argument("--k", type=int, default=5, help="cross-validation folds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", dest="test_fraction", type=float, default=0.2)
    p.add_argument(
        "--eval-fraction",
        dest="eval_fraction",
        type=float,
        default=pipelines.DEFAULT_EVAL_FRACTION,
        help="fraction of each journey observed when scoring locationpreview",
    )
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("predict", help="predict with a trained model file")
    p.add_argument("feature", choices=["userprofile", "locationpreview"])
    p.add_argument("--model", required=True)
    p.add_argument("--query", help="JSON list of {user_id, leave_station, leave_time}")
    p.add_argument("--trajectories", help="trajectory JSONL of prefixes")
    p.add_argument("--fraction", type=float, default=1.0)
    p.add_argument(
        "--station-of-interest",
        dest="station_of_interest",
        help="also aggregate arrival probability at this station",
    )
    p.add_argument("--out", help="write predictions to this file instead of stdout")
    p.set_defaults(handler=_cmd_predict)

    p = sub.add_parser("status", help="replay an event log and show per-station bike counts")
    p.add_argument("--events", required=True, help="event CSV path")
    p.add_argument("--stations", required=True)
    p.add_argument("--docked", help="JSON map of initially docked bikes per station")
    p.set_defaults(handler=_cmd_status)

    p = sub.add_parser("rank", help="rank product configurations by cost-performance")
    p.add_argument("--feature-model", dest="feature_model", required=True)
    p.add_argument(
        "--report",
        action="append",
        metavar="NAME=PATH",
        help="evaluation report per predictive feature (repeatable)",
    )
    p.add_argument("--w-acc", dest="w_acc", type=float, default=1.0)
    p.add_argument("--w-mae", dest="w_mae", type=float, default=1.0)
    p.add_argument("--w-cost", dest="w_cost", type=float, default=1.0)
    p.add_argument("--mae-horizon", dest="mae_horizon", type=float, default=1800.0)
    p.add_argument("--out", help="write the ranking document to this file")
    p.set_defaults(handler=_cmd_rank)

    p = sub.add_parser("report", help="pretty-print a stored evaluation report")
    p.add_argument("--report", required=True)
    p.set_defaults(handler=_cmd_report)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "train":
        if args.feature == "userprofile" and not args.trips:
            parser.error("train userprofile requires --trips")
        if args.feature == "locationpreview" and not args.trajectories:
            parser.error("train locationpreview requires --trajectories")
    if args.command == "predict":
        if args.feature == "userprofile" and not args.query:
            parser.error("predict userprofile requires --query")
        if args.feature == "locationpreview" and not args.trajectories:
            parser.error("predict locationpreview requires --trajectories")
    try:
        return args.handler(args)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (BikemlError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return _exit_code(e)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
