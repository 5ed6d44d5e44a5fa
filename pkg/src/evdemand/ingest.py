"""CSV readers for static vehicle metadata and dynamic GPS/SOC trajectories."""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, TextIO

from evdemand.errors import ParseError, SchemaError, ValidationError

log = logging.getLogger(__name__)


class Powertrain(str, enum.Enum):
    ICEV = "ICEV"
    HEV = "HEV"
    PHEV_EV = "PHEV_EV"


# Case-insensitive type-string lookup. VED uses "ICE", "HEV", "PHEV", "EV".
POWERTRAIN_ALIASES = {
    "ice": Powertrain.ICEV,
    "icev": Powertrain.ICEV,
    "hev": Powertrain.HEV,
    "phev": Powertrain.PHEV_EV,
    "ev": Powertrain.PHEV_EV,
    "bev": Powertrain.PHEV_EV,
    "phev_ev": Powertrain.PHEV_EV,
    "phev/ev": Powertrain.PHEV_EV,
}

DYNAMIC_FIELDS = ("day_num", "vehicle_id", "trip_no", "timestamp_ms", "lat", "lon", "soc_pct")
OPTIONAL_DYNAMIC_FIELDS = {"soc_pct"}

SYNTH_DYNAMIC_SCHEMA = {name: name for name in DYNAMIC_FIELDS}
SYNTH_STATIC_SCHEMA = {"vehicle_id": "vehicle_id", "type": "vehicle_type"}

VED_DYNAMIC_SCHEMA = {
    "day_num": "DayNum",
    "vehicle_id": "VehId",
    "trip_no": "Trip",
    "timestamp_ms": "Timestamp(ms)",
    "lat": "Latitude[deg]",
    "lon": "Longitude[deg]",
    "soc_pct": "HV Battery SOC[%]",
}
VED_STATIC_SCHEMA = {"vehicle_id": "VehId", "type": "Vehicle Type"}

_MISSING = {"", "nan", "NaN", "NA", "null", "None"}


@dataclass(frozen=True, slots=True)
class RawRecord:
    day_num: float
    vehicle_id: int
    trip_no: int
    timestamp_ms: int
    lat: float
    lon: float
    soc_pct: Optional[float] = None


@dataclass(frozen=True, slots=True)
class VehicleInfo:
    vehicle_id: int
    powertrain: Powertrain


@dataclass
class IngestReport:
    """Counters filled in by the readers; serialized into the ingest stage output."""

    rows: int = 0
    missing_gps: int = 0
    missing_soc: int = 0
    static_rejects: list = field(default_factory=list)
    unknown_vehicle_records: int = 0

    def as_dict(self):
        return {
            "rows": self.rows,
            "missing_gps": self.missing_gps,
            "missing_soc": self.missing_soc,
            "static_rejects": [list(r) for r in self.static_rejects],
            "unknown_vehicle_records": self.unknown_vehicle_records,
        }


def _as_stream(stream) -> TextIO:
    if isinstance(stream, str):
        return io.StringIO(stream)
    return stream


def _column_index(header: list[str], schema: dict, required: Iterable[str], optional=()):
    cleaned = [h.strip().lstrip("﻿") for h in header]
    idx = {}
    for name in list(required) + list(optional):
        if name not in schema:
            if name in optional:
                continue
            raise SchemaError(f"schema map has no entry for field {name!r}")
        col = schema[name]
        if col in cleaned:
            idx[name] = cleaned.index(col)
        elif name not in optional:
            raise SchemaError(f"missing mandatory column {col!r} (field {name!r})")
    return idx


def _float(cell: str, line: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"malformed number {cell!r}", line=line, column=column) from None
    if math.isinf(value):
        raise ParseError(f"non-finite number {cell!r}", line=line, column=column)
    return value


def _int(cell: str, line: int, column: str) -> int:
    try:
        return int(cell)
    except ValueError:
        value = _float(cell, line, column)
        if math.isnan(value) or value != int(value):
            raise ParseError(f"expected an integer, got {cell!r}", line=line, column=column) from None
        return int(value)


def parse_dynamic(stream, schema: dict = SYNTH_DYNAMIC_SCHEMA,
                  report: Optional[IngestReport] = None) -> list[RawRecord]:
    """Parse a dynamic trajectory CSV into RawRecords, in file order.

    Empty or NaN SOC cells become ``soc_pct=None``. Rows with an empty
    latitude or longitude cell are dropped and counted in ``report``.
    """
    reader = csv.reader(_as_stream(stream))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("dynamic CSV has no header row") from None
    required = [f for f in DYNAMIC_FIELDS if f not in OPTIONAL_DYNAMIC_FIELDS]
    idx = _column_index(header, schema, required, OPTIONAL_DYNAMIC_FIELDS)
    soc_col = idx.get("soc_pct")

    records = []
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if report is not None:
            report.rows += 1
        cells = {name: row[i].strip() if i < len(row) else "" for name, i in idx.items()}
        if cells["lat"] in _MISSING or cells["lon"] in _MISSING:
            if report is not None:
                report.missing_gps += 1
            continue

        day_num = _float(cells["day_num"], line, schema["day_num"])
        vehicle_id = _int(cells["vehicle_id"], line, schema["vehicle_id"])
        trip_no = _int(cells["trip_no"], line, schema["trip_no"])
        ts = _int(cells["timestamp_ms"], line, schema["timestamp_ms"])
        lat = _float(cells["lat"], line, schema["lat"])
        lon = _float(cells["lon"], line, schema["lon"])
        soc = None
        if soc_col is not None and cells["soc_pct"] not in _MISSING:
            soc = _float(cells["soc_pct"], line, schema["soc_pct"])
            if math.isnan(soc):
                soc = None
        if soc is None and report is not None:
            report.missing_soc += 1

        if not (day_num > 0):
            raise ValidationError(f"must be > 0, got {day_num}", "day_num", line, schema["day_num"])
        if ts < 0:
            raise ValidationError(f"must be >= 0, got {ts}", "timestamp_ms", line, schema["timestamp_ms"])
        if not -90.0 <= lat <= 90.0:
            raise ValidationError(f"out of [-90, 90]: {lat}", "lat", line, schema["lat"])
        if not -180.0 <= lon <= 180.0:
            raise ValidationError(f"out of [-180, 180]: {lon}", "lon", line, schema["lon"])
        if soc is not None and not 0.0 <= soc <= 100.0:
            raise ValidationError(f"out of [0, 100]: {soc}", "soc_pct", line, schema["soc_pct"])

        records.append(RawRecord(day_num, vehicle_id, trip_no, ts, lat, lon, soc))
    return records


def serialize_dynamic(records: Iterable[RawRecord], out: TextIO,
                      schema: dict = SYNTH_DYNAMIC_SCHEMA) -> None:
    """Inverse of :func:`parse_dynamic`. Floats are written with ``repr`` so they round-trip."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([schema[f] for f in DYNAMIC_FIELDS])
    for r in records:
        writer.writerow([
            repr(r.day_num), r.vehicle_id, r.trip_no, r.timestamp_ms,
            repr(r.lat), repr(r.lon), "" if r.soc_pct is None else repr(r.soc_pct),
        ])


def parse_powertrain(text: str) -> Optional[Powertrain]:
    return POWERTRAIN_ALIASES.get(text.strip().lower())


def parse_static(stream, schema: dict = SYNTH_STATIC_SCHEMA,
                 report: Optional[IngestReport] = None) -> tuple[list[VehicleInfo], int]:
    """Parse the static vehicle table.

    Returns ``(infos, n_rejected)``. Rows with an unknown type string are
    skipped and listed in ``report.static_rejects`` as ``(line, vehicle_id, type)``.
    """
    reader = csv.reader(_as_stream(stream))
    try:
        header = next(reader)
    except StopIteration:
        return [], 0
    idx = _column_index(header, schema, ["vehicle_id", "type"])

    infos: list[VehicleInfo] = []
    seen: dict[int, int] = {}
    rejected = 0
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        vid = _int(row[idx["vehicle_id"]].strip(), line, schema["vehicle_id"])
        type_str = row[idx["type"]].strip() if idx["type"] < len(row) else ""
        powertrain = parse_powertrain(type_str)
        if powertrain is None:
            rejected += 1
            if report is not None:
                report.static_rejects.append((line, vid, type_str))
            log.warning("line %d: unknown vehicle type %r for vehicle %d; skipped", line, type_str, vid)
            continue
        if vid in seen:
            raise ValidationError(
                f"duplicate vehicle id {vid} (first seen on line {seen[vid]})",
                "vehicle_id", line, schema["vehicle_id"])
        seen[vid] = line
        infos.append(VehicleInfo(vid, powertrain))
    return infos, rejected


def serialize_static(infos: Iterable[VehicleInfo], out: TextIO,
                     schema: dict = SYNTH_STATIC_SCHEMA) -> None:
    names = {Powertrain.ICEV: "ICE", Powertrain.HEV: "HEV", Powertrain.PHEV_EV: "PHEV"}
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([schema["vehicle_id"], schema["type"]])
    for info in infos:
        writer.writerow([info.vehicle_id, names[info.powertrain]])


def filter_by_powertrain(records: Iterable[RawRecord], infos: Iterable[VehicleInfo],
                         wanted) -> tuple[list[RawRecord], int]:
    """Keep records whose vehicle has a wanted powertrain.

    Returns ``(kept, dropped_unknown)`` where the second item counts records
    whose vehicle id is missing from ``infos``.
    """
    wanted = {Powertrain(w) for w in wanted}
    lookup = {i.vehicle_id: i.powertrain for i in infos}
    kept = []
    unknown = 0
    for r in records:
        pt = lookup.get(r.vehicle_id)
        if pt is None:
            unknown += 1
        elif pt in wanted:
            kept.append(r)
    if unknown:
        log.warning("dropped %d records of vehicles missing from the static table", unknown)
    return kept, unknown
