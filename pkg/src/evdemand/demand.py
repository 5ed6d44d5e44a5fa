"""Zonal hourly charging-demand profiles."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from evdemand.charging import ChargerParams, ChargingEvent, make_event
from evdemand.errors import ModelError
from evdemand.features import Table

HOURS = 24


@dataclass
class DemandProfile:
    zones: np.ndarray  # shape (n, 24), kWh per zone and hour
    case: str = ""
    event_count: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def total(self) -> np.ndarray:
        return self.zones.sum(axis=0)

    @property
    def n(self) -> int:
        return self.zones.shape[0]

    def __add__(self, other: "DemandProfile") -> "DemandProfile":
        return DemandProfile(self.zones + other.zones, self.case,
                             self.event_count + other.event_count, dict(self.meta))

    def as_dict(self):
        return {"case": self.case, "event_count": self.event_count, "meta": self.meta,
                "zones": {f"zone_{i + 1}": row.tolist() for i, row in enumerate(self.zones)},
                "total": self.total.tolist()}


def deposit(bins: np.ndarray, start_h: float, duration_h: float, energy: float) -> None:
    """Spread ``energy`` uniformly over ``[start_h, start_h + duration_h)`` on a 24 h ring."""
    if duration_h <= 0:
        bins[int(math.floor(start_h)) % HOURS] += energy
        return
    rate = energy / duration_h
    end = start_h + duration_h
    h = math.floor(start_h)
    while h < end:
        overlap = min(end, h + 1) - max(start_h, h)
        if overlap > 0:
            bins[h % HOURS] += rate * overlap
        h += 1


def aggregate(events: Iterable[ChargingEvent], n_zones: int, params: ChargerParams = ChargerParams(),
              grid_side: bool = False, impulse: bool = False, case: str = "") -> DemandProfile:
    """Bin events into per-zone hourly energy.

    By default battery-side energy (rate alpha*eta) is spread over the charging
    interval. ``grid_side`` bins the grid draw ``cd / eta`` at rate alpha instead.
    ``impulse`` puts each event's whole energy in its start hour.
    """
    events = sorted(events, key=lambda e: (e.zone, e.start_h, e.vehicle_id, e.cd_kwh))
    zones = np.zeros((n_zones, HOURS))
    for e in events:
        if not 1 <= e.zone <= n_zones:
            raise ValueError(f"event zone {e.zone} outside 1..{n_zones}")
        energy = e.cd_kwh / params.eta if grid_side else e.cd_kwh
        duration = 0.0 if impulse else e.duration_h
        deposit(zones[e.zone - 1], e.start_h, duration, energy)
    return DemandProfile(zones, case, len(events),
                         {"grid_side": grid_side, "impulse_binning": impulse})


def actual_events(table: Table, n_zones: int, params: ChargerParams) -> list[ChargingEvent]:
    """Ground-truth events of a held-out table."""
    events = []
    for vid, label, t_end, soc_req in zip(table["vehicle_id"], table["label"],
                                          table["t_end"], table["soc_req"]):
        if label > n_zones:
            continue
        ev = make_event(int(vid), int(label), float(t_end), float(soc_req), params)
        if ev is not None:
            events.append(ev)
    return events


def predict_events(case: int, models: dict, test: Table, n_zones: int,
                   params: ChargerParams = ChargerParams()) -> list[ChargingEvent]:
    """Forecast charging events for held-out trips.

    ``models`` maps ``label``, ``t_end`` and ``soc_req`` to fitted
    predictors. Case 1 feeds the classifier's zone to the SOC regressor;
    case 2 uses the true zone. Predicted SOC is clamped to [0, 100] and the
    predicted end time to no earlier than the trip start.
    """
    if case not in (1, 2):
        raise ValueError(f"case must be 1 or 2, got {case}")
    needed = ("t_end", "soc_req") if case == 2 else ("label", "t_end", "soc_req")
    for name in needed:
        if models.get(name) is None:
            raise ModelError(f"case {case} needs a trained {name!r} model")
    if len(test) == 0:
        return []

    if case == 1:
        labels = np.asarray(models["label"].predict(test), dtype=float)
    else:
        labels = np.asarray(test["label"], dtype=float)
    keep = np.flatnonzero(labels <= n_zones)
    if len(keep) == 0:
        return []
    rows = test.take(keep)
    rows.columns["label"] = labels[keep]
    t_end = np.maximum(models["t_end"].predict(rows), rows["t_start"])
    soc_req = np.clip(models["soc_req"].predict(rows), 0.0, 100.0)

    events = []
    for vid, zone, start, soc in zip(rows["vehicle_id"], rows["label"], t_end, soc_req):
        ev = make_event(int(vid), int(zone), float(start), float(soc), params)
        if ev is not None:
            events.append(ev)
    return events


def write_profile_csv(profile: DemandProfile, out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["hour"] + [f"zone_{i + 1}" for i in range(profile.n)] + ["total"])
    total = profile.total
    for h in range(HOURS):
        w.writerow([h] + [repr(float(v)) for v in profile.zones[:, h]] + [repr(float(total[h]))])
