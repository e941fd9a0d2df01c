"""Readers and writers for the external file formats.

Formats:
  - trip log: UTF-8 CSV with header
    ``user_id,leave_station,leave_time,return_station,return_time``
  - trajectories: newline-delimited JSON, one record per line with keys
    ``trip_id``, ``points`` (list of ``[t, x, y]``) and, when ground truth is
    known, ``destination`` and ``arrival_time``
  - stations: JSON list of ``{station_id, x, y, capacity}``
  - event log: CSV with header ``event,bike_id,user_id,station_id,time``
    (``user_id`` empty on return rows)

Parsing is strict: any bad row raises :class:`MalformedRow` with its line
number, never skips.
"""

from __future__ import annotations

import csv
import io
import json

from .domain import GpsTrajectory, Pickup, Return, Event, Station, StationMap, TripRecord
from .errors import MalformedRow

TRIP_HEADER = ["user_id", "leave_station", "leave_time", "return_station", "return_time"]
EVENT_HEADER = ["event", "bike_id", "user_id", "station_id", "time"]


def _int_field(value: str, name: str, line_no: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise MalformedRow(line_no, f"{name} is not an integer: {value!r}") from None


# ---------------------------------------------------------------------------
# Trip logs


def serialize_trip_log(trips: list[TripRecord]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TRIP_HEADER)
    for t in trips:
        writer.writerow(
            [t.user_id, t.leave_station, t.leave_time, t.return_station, t.return_time]
        )
    return out.getvalue()


def parse_trip_log(text: str | bytes) -> list[TripRecord]:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != TRIP_HEADER:
        raise MalformedRow(1, f"expected header {','.join(TRIP_HEADER)}")
    trips = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != 5:
            raise MalformedRow(line_no, f"expected 5 fields, got {len(row)}")
        user_id, leave_station, leave_s, return_station, return_s = row
        leave_time = _int_field(leave_s, "leave_time", line_no)
        return_time = _int_field(return_s, "return_time", line_no)
        if return_time <= leave_time:
            raise MalformedRow(line_no, "return_time must be after leave_time")
        trips.append(TripRecord(user_id, leave_station, leave_time, return_station, return_time))
    return trips


# ---------------------------------------------------------------------------
# Trajectories


def serialize_trajectories(trajectories: list[GpsTrajectory]) -> str:
    lines = []
    for traj in trajectories:
        record: dict = {"trip_id": traj.trip_id}
        if traj.destination is not None:
            record["destination"] = traj.destination
            record["arrival_time"] = traj.arrival_time
        record["points"] = [[t, x, y] for t, x, y in traj.points]
        lines.append(json.dumps(record))
    return "".join(line + "\n" for line in lines)


def parse_trajectories(text: str | bytes) -> list[GpsTrajectory]:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    trajectories = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            raise MalformedRow(line_no, "blank line")
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise MalformedRow(line_no, f"invalid JSON: {e.msg}") from None
        if not isinstance(record, dict):
            raise MalformedRow(line_no, "record is not an object")
        try:
            trip_id = record["trip_id"]
            raw_points = record["points"]
        except KeyError as e:
            raise MalformedRow(line_no, f"missing key {e.args[0]!r}") from None
        if not isinstance(raw_points, list) or any(
            not isinstance(p, list) or len(p) != 3 for p in raw_points
        ):
            raise MalformedRow(line_no, "points must be a list of [t, x, y] triples")
        points = tuple((int(p[0]), float(p[1]), float(p[2])) for p in raw_points)
        destination = record.get("destination")
        arrival_time = record.get("arrival_time")
        try:
            trajectories.append(
                GpsTrajectory(
                    trip_id=trip_id,
                    points=points,
                    destination=destination,
                    arrival_time=None if arrival_time is None else int(arrival_time),
                )
            )
        except ValueError as e:
            raise MalformedRow(line_no, str(e)) from None
    return trajectories


# ---------------------------------------------------------------------------
# Stations


def serialize_stations(station_map: StationMap) -> str:
    records = [
        {"station_id": s.station_id, "x": s.x, "y": s.y, "capacity": s.capacity}
        for s in station_map.stations
    ]
    return json.dumps(records, indent=2) + "\n"


def parse_stations(text: str | bytes) -> StationMap:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        records = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedRow(e.lineno, f"invalid JSON: {e.msg}") from None
    if not isinstance(records, list):
        raise MalformedRow(1, "stations file must hold a JSON list")
    stations = []
    for i, rec in enumerate(records, start=1):
        try:
            stations.append(
                Station(rec["station_id"], float(rec["x"]), float(rec["y"]), int(rec["capacity"]))
            )
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedRow(i, f"bad station record: {e}") from None
    try:
        return StationMap(tuple(stations))
    except ValueError as e:
        raise MalformedRow(1, str(e)) from None


# ---------------------------------------------------------------------------
# Event logs


def serialize_events(events: list[Event]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(EVENT_HEADER)
    for ev in events:
        if isinstance(ev, Pickup):
            writer.writerow(["pickup", ev.bike_id, ev.user_id, ev.station_id, ev.time])
        else:
            writer.writerow(["return", ev.bike_id, "", ev.station_id, ev.time])
    return out.getvalue()


def parse_events(text: str | bytes) -> list[Event]:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != EVENT_HEADER:
        raise MalformedRow(1, f"expected header {','.join(EVENT_HEADER)}")
    events: list[Event] = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != 5:
            raise MalformedRow(line_no, f"expected 5 fields, got {len(row)}")
        kind, bike_id, user_id, station_id, time_s = row
        time = _int_field(time_s, "time", line_no)
        if kind == "pickup":
            if not user_id:
                raise MalformedRow(line_no, "pickup rows need a user_id")
            events.append(Pickup(bike_id, user_id, station_id, time))
        elif kind == "return":
            events.append(Return(bike_id, station_id, time))
        else:
            raise MalformedRow(line_no, f"unknown event kind {kind!r}")
    return events
