"""Collapse raw trajectory samples into per-trip summaries."""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional, TextIO

from evdemand.errors import DataIntegrityError
from evdemand.geo import GeoPoint, haversine_km
from evdemand.ingest import RawRecord

log = logging.getLogger(__name__)

MS_PER_HOUR = 3_600_000
DAY_NUM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Trip:
    vehicle_id: int
    day_index: int
    trip_no: int
    t_start: float
    t_end: float
    origin: GeoPoint
    dest: GeoPoint
    distance_km: float
    soc_dep: Optional[float] = None
    soc_arr: Optional[float] = None

    @property
    def has_soc(self) -> bool:
        return self.soc_dep is not None and self.soc_arr is not None


def start_hour(day_num: float) -> float:
    """Hour of day encoded in the fractional part of a day number."""
    return (day_num - math.floor(day_num)) * 24.0


def path_distance_km(points) -> float:
    return math.fsum(haversine_km(a, b) for a, b in zip(points, points[1:]))


def build_trips(records: Iterable[RawRecord]) -> list[Trip]:
    """Group records by (vehicle, day, trip number) and summarize each group."""
    groups: dict[tuple, list[RawRecord]] = defaultdict(list)
    for r in records:
        groups[(r.vehicle_id, math.floor(r.day_num), r.trip_no)].append(r)

    trips = []
    for (vid, day, trip_no), recs in groups.items():
        # full key makes the within-group order independent of input order
        recs.sort(key=lambda r: (r.timestamp_ms, r.lat, r.lon, r.day_num,
                                 -1.0 if r.soc_pct is None else r.soc_pct))
        day_nums = [r.day_num for r in recs]
        if max(day_nums) - min(day_nums) > DAY_NUM_TOLERANCE:
            raise DataIntegrityError(
                f"vehicle {vid} trip {trip_no}: day_num varies within the trip "
                f"({min(day_nums)} .. {max(day_nums)})")
        t_start = start_hour(min(day_nums))
        t_end = t_start + recs[-1].timestamp_ms / MS_PER_HOUR
        points = [GeoPoint(r.lat, r.lon) for r in recs]
        socs = [r.soc_pct for r in recs if r.soc_pct is not None]
        trips.append(Trip(
            vehicle_id=vid,
            day_index=day,
            trip_no=trip_no,
            t_start=t_start,
            t_end=t_end,
            origin=points[0],
            dest=points[-1],
            distance_km=path_distance_km(points),
            soc_dep=socs[0] if socs else None,
            soc_arr=socs[-1] if socs else None,
        ))
    trips.sort(key=lambda t: (t.vehicle_id, t.day_index, t.t_start, t.trip_no))
    collisions = trip_no_collisions(trips)
    if collisions:
        log.warning("%d (vehicle, trip_no) pairs span more than one day; kept as separate trips",
                    len(collisions))
    return trips


def trip_no_collisions(trips: Iterable[Trip]) -> list[tuple[int, int]]:
    """(vehicle_id, trip_no) pairs that occur on more than one day."""
    days = defaultdict(set)
    for t in trips:
        days[(t.vehicle_id, t.trip_no)].add(t.day_index)
    return sorted(k for k, v in days.items() if len(v) > 1)


def daily_trip_counts(trips: Iterable[Trip]) -> dict[tuple[int, int], int]:
    return dict(Counter((t.vehicle_id, t.day_index) for t in trips))


TRIP_COLUMNS = ["vehicle_id", "day_index", "trip_no", "t_start", "t_end",
                "origin_lat", "origin_lon", "dest_lat", "dest_lon",
                "distance_km", "soc_dep", "soc_arr"]


def _cell(x):
    return "" if x is None else repr(x)


def write_trips_csv(trips: Iterable[Trip], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRIP_COLUMNS)
    for t in trips:
        w.writerow([t.vehicle_id, t.day_index, t.trip_no, repr(t.t_start), repr(t.t_end),
                    repr(t.origin.lat), repr(t.origin.lon), repr(t.dest.lat), repr(t.dest.lon),
                    repr(t.distance_km), _cell(t.soc_dep), _cell(t.soc_arr)])


def read_trips_csv(stream: TextIO) -> list[Trip]:
    def opt(s):
        return float(s) if s else None

    trips = []
    for row in csv.DictReader(stream):
        trips.append(Trip(
            vehicle_id=int(row["vehicle_id"]),
            day_index=int(row["day_index"]),
            trip_no=int(row["trip_no"]),
            t_start=float(row["t_start"]),
            t_end=float(row["t_end"]),
            origin=GeoPoint(float(row["origin_lat"]), float(row["origin_lon"])),
            dest=GeoPoint(float(row["dest_lat"]), float(row["dest_lon"])),
            distance_km=float(row["distance_km"]),
            soc_dep=opt(row["soc_dep"]),
            soc_arr=opt(row["soc_arr"]),
        ))
    return trips
