"""Charging-event detection, zone labelling, and energy/duration arithmetic."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from itertools import groupby
from typing import Iterable, Optional, Sequence, TextIO

from evdemand.geo import ZoneGrid, zone_of
from evdemand.trips import Trip

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChargerParams:
    cap_kwh: float = 24.0
    alpha_kw: float = 6.6
    eta: float = 0.9
    # per-vehicle battery capacity overrides
    cap_overrides: dict = field(default_factory=dict, hash=False, compare=True)

    def __post_init__(self):
        if not (self.cap_kwh > 0 and self.alpha_kw > 0 and 0 < self.eta <= 1):
            raise ValueError(f"invalid charger parameters: {self}")
        if any(not c > 0 for c in self.cap_overrides.values()):
            raise ValueError("capacity overrides must be positive")

    def capacity(self, vehicle_id: Optional[int] = None) -> float:
        return self.cap_overrides.get(vehicle_id, self.cap_kwh)

    @property
    def battery_rate_kw(self) -> float:
        return self.alpha_kw * self.eta


@dataclass(frozen=True)
class LabeledTrip:
    trip: Trip
    label: int
    soc_req: float


@dataclass(frozen=True)
class ChargingEvent:
    vehicle_id: int
    zone: int
    start_h: float
    cd_kwh: float
    duration_h: float


@dataclass
class LabelReport:
    skipped_no_soc: int = 0
    events: int = 0
    labeled: int = 0


def label_trips(trips: Iterable[Trip], grid: ZoneGrid,
                report: Optional[LabelReport] = None) -> list[LabeledTrip]:
    """Label each trip with its charging zone, or ``n + 1`` when no charge follows.

    Trips are paired with the next trip of the same vehicle on the same day.
    A strictly positive SOC increase between arrival and the next departure
    marks a charging event at the first trip's destination. The last trip of
    each vehicle-day is never a charging event.
    """
    usable = []
    skipped = 0
    for t in trips:
        if t.has_soc:
            usable.append(t)
        else:
            skipped += 1
    if skipped:
        log.info("skipped %d trips without SOC samples", skipped)
    usable.sort(key=lambda t: (t.vehicle_id, t.day_index, t.t_start, t.trip_no))

    dummy = grid.no_charge_label
    out = []
    for _, day_trips in groupby(usable, key=lambda t: (t.vehicle_id, t.day_index)):
        day_trips = list(day_trips)
        for k, trip in enumerate(day_trips):
            if k + 1 < len(day_trips):
                soc_req = day_trips[k + 1].soc_dep - trip.soc_arr
            else:
                soc_req = 0.0
            if soc_req > 0:
                out.append(LabeledTrip(trip, zone_of(grid, trip.dest), soc_req))
            else:
                out.append(LabeledTrip(trip, dummy, 0.0))

    if report is not None:
        report.skipped_no_soc += skipped
        report.labeled += len(out)
        report.events += sum(1 for lt in out if lt.label != dummy)
    return out


def charging_demand(soc_req: float, params: ChargerParams = ChargerParams(),
                    vehicle_id: Optional[int] = None) -> float:
    """Battery-side energy in kWh for an SOC increase given in percentage points."""
    if soc_req < 0:
        raise ValueError(f"required SOC must be non-negative, got {soc_req}")
    if soc_req > 0:
        return soc_req / 100.0 * params.capacity(vehicle_id)
    return 0.0


def charging_duration(cd_kwh: float, params: ChargerParams = ChargerParams()) -> float:
    return cd_kwh / (params.alpha_kw * params.eta)


def make_event(vehicle_id: int, zone: int, start_h: float, soc_req: float,
               params: ChargerParams) -> Optional[ChargingEvent]:
    cd = charging_demand(soc_req, params, vehicle_id)
    if cd <= 0:
        return None
    return ChargingEvent(vehicle_id, zone, start_h, cd, charging_duration(cd, params))


def to_events(labeled: Iterable[LabeledTrip], params: ChargerParams = ChargerParams(),
              n_zones: Optional[int] = None) -> list[ChargingEvent]:
    """One event per trip labelled with a real zone, starting at the trip's end time.

    Without ``n_zones`` any label carrying a positive ``soc_req`` counts as a zone.
    """
    events = []
    for lt in labeled:
        if n_zones is not None and lt.label > n_zones:
            continue
        ev = make_event(lt.trip.vehicle_id, lt.label, lt.trip.t_end, lt.soc_req, params)
        if ev is not None:
            events.append(ev)
    return events


LABELED_COLUMNS = ["vehicle_id", "trip_no", "t_start", "t_end", "origin_lat", "origin_lon",
                   "label", "soc_dep", "soc_req"]


def write_labeled_csv(labeled: Sequence[LabeledTrip], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(LABELED_COLUMNS)
    for lt in labeled:
        t = lt.trip
        w.writerow([t.vehicle_id, t.trip_no, repr(t.t_start), repr(t.t_end),
                    repr(t.origin.lat), repr(t.origin.lon), lt.label,
                    repr(t.soc_dep), repr(lt.soc_req)])


def write_events_csv(events: Sequence[ChargingEvent], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["vehicle_id", "zone", "start_h", "cd_kwh", "duration_h"])
    for e in events:
        w.writerow([e.vehicle_id, e.zone, repr(e.start_h), repr(e.cd_kwh), repr(e.duration_h)])
