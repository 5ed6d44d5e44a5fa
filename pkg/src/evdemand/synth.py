"""Seeded synthetic fleet with planted, recoverable charging events.

Each EV day is a chain of trips whose start hours fall in distinct hour
bands; the last trip always uses the final (evening) band. For a
``planted_frac`` share of trips the destination zone and the decision to
charge there are a fixed function of (origin zone, start band), drawn once
from the seed. That makes the zone label learnable up to a ceiling the
generator can report. Remaining trips pick a random destination and charge
with the destination zone's propensity.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from evdemand.geo import BoundingBox, ZoneGrid, haversine_km, zone_of
from evdemand.ingest import Powertrain, RawRecord, VehicleInfo, serialize_dynamic, serialize_static
from evdemand.trips import path_distance_km

DEFAULT_BBOX = BoundingBox(42.22, 42.32, -83.80, -83.66)
DEFAULT_BANDS = ((6.0, 9.0), (9.0, 12.0), (12.0, 15.0), (15.0, 18.0), (18.0, 21.0))
RULE_STREAM = 0x5EED


@dataclass
class SynthConfig:
    n_vehicles: int = 50
    n_icev: int = 20
    days: int = 30
    first_day: int = 1
    trips_per_day: tuple = (2, 5)
    icev_trips_per_day: tuple = (2, 6)
    grid: ZoneGrid = field(default_factory=lambda: ZoneGrid(DEFAULT_BBOX, 3, 3))
    # per-zone charging propensity, or one value for every zone
    propensity: object = 0.5
    planted_frac: float = 0.9
    bands: tuple = DEFAULT_BANDS
    trip_duration_h: float = 0.4
    trip_duration_jitter_h: float = 0.0
    soc_drain_per_km: float = 0.6
    soc_init: tuple = (60.0, 95.0)
    charge_jump: tuple = (10.0, 50.0)
    idle_drain: tuple = (0.0, 0.3)
    points_per_trip: int = 6
    cell_margin: float = 0.1
    icev_long_trip_prob: float = 0.05
    seed: int = 7

    def propensities(self) -> list[float]:
        n = self.grid.n
        if isinstance(self.propensity, (int, float)):
            return [float(self.propensity)] * n
        p = [float(x) for x in self.propensity]
        if len(p) != n:
            raise ValueError(f"propensity list has {len(p)} entries for {n} zones")
        return p

    def validate(self) -> None:
        if any(not 0.0 <= p <= 1.0 for p in self.propensities()):
            raise ValueError("propensities must lie in [0, 1]")
        if not 0.0 <= self.planted_frac <= 1.0:
            raise ValueError("planted_frac must lie in [0, 1]")
        if self.n_vehicles < 0 or self.n_icev < 0 or self.days < 1 or self.first_day < 1:
            raise ValueError("vehicle counts must be >= 0, days and first_day >= 1")
        lo, hi = self.trips_per_day
        if not 1 <= lo <= hi <= len(self.bands):
            raise ValueError(f"trips_per_day must lie within 1..{len(self.bands)} (one per hour band)")
        for a, b in self.bands:
            if b - a <= self.trip_duration_h + self.trip_duration_jitter_h:
                raise ValueError("trip duration does not fit in an hour band")
        if self.bands[-1][1] + self.trip_duration_h + self.trip_duration_jitter_h > 24:
            raise ValueError("last hour band runs past midnight")
        if self.points_per_trip < 2:
            raise ValueError("points_per_trip must be >= 2")
        diag = _max_trip_km(self.grid.bbox)
        if self.soc_drain_per_km * diag >= min(self.soc_init):
            raise ValueError(
                f"infeasible: a {diag:.1f} km trip drains {self.soc_drain_per_km * diag:.1f} SOC points, "
                f"more than the lowest initial SOC {min(self.soc_init)}")
        if not 0 < self.charge_jump[0] <= self.charge_jump[1]:
            raise ValueError("charge_jump must be a positive range")


def _max_trip_km(b: BoundingBox) -> float:
    # intermediate-point jitter can lengthen the path a little
    return 1.2 * haversine_km((b.lat_min, b.lon_min), (b.lat_max, b.lon_max))


@dataclass(frozen=True)
class GroundTruthEvent:
    vehicle_id: int
    day_index: int
    trip_no: int
    zone: int
    soc_req: float


@dataclass
class SynthData:
    records: list[RawRecord]
    infos: list[VehicleInfo]
    events: list[GroundTruthEvent]
    # (vehicle_id, day_index, trip_no) -> label the planted rule predicts
    rule_labels: dict
    config: SynthConfig

    def dynamic_csv(self, schema=None) -> str:
        buf = io.StringIO()
        if schema is None:
            serialize_dynamic(self.records, buf)
        else:
            serialize_dynamic(self.records, buf, schema)
        return buf.getvalue()

    def static_csv(self, schema=None) -> str:
        buf = io.StringIO()
        if schema is None:
            serialize_static(self.infos, buf)
        else:
            serialize_static(self.infos, buf, schema)
        return buf.getvalue()


def planted_ceiling(rule_labels: dict, keys: Sequence[tuple], labels: Sequence[int]) -> float:
    """Share (in percent) of trips whose actual label equals the planted rule's label.

    No classifier that sees only the trip features can do meaningfully better.
    """
    if len(keys) == 0:
        return math.nan
    hits = sum(1 for k, l in zip(keys, labels) if rule_labels.get(k) == int(l))
    return 100.0 * hits / len(keys)


def _point_in(rng, box: BoundingBox, margin: float):
    dlat = box.lat_max - box.lat_min
    dlon = box.lon_max - box.lon_min
    return (box.lat_min + dlat * rng.uniform(margin, 1 - margin),
            box.lon_min + dlon * rng.uniform(margin, 1 - margin))


def _path(rng, a, b, n):
    pts = [a]
    for i in range(1, n - 1):
        f = i / (n - 1)
        pts.append((a[0] + f * (b[0] - a[0]) + rng.normal(0, 2e-4),
                    a[1] + f * (b[1] - a[1]) + rng.normal(0, 2e-4)))
    pts.append(b)
    return pts


def _rule_table(cfg: SynthConfig):
    """(origin zone, band) -> (destination zone, charges?) for the non-final bands."""
    rng = np.random.default_rng([cfg.seed, RULE_STREAM])
    prop = cfg.propensities()
    table = {}
    for z in range(1, cfg.grid.n + 1):
        for b in range(len(cfg.bands) - 1):
            dest = int(rng.integers(1, cfg.grid.n + 1))
            table[(z, b)] = (dest, bool(rng.random() < prop[dest - 1]))
    return table


def _trip_records(cfg, vid, day, trip_no, t_start, duration, pts, soc_dep, soc_arr):
    n = len(pts)
    ts = np.linspace(0, duration * 3_600_000, n).round().astype(int)
    day_num = day + t_start / 24.0
    recs = []
    for i, (p, t) in enumerate(zip(pts, ts)):
        if soc_dep is None:
            soc = None
        elif i == n - 1:
            soc = soc_arr
        else:
            soc = soc_dep + (soc_arr - soc_dep) * i / (n - 1)
        recs.append(RawRecord(day_num, vid, trip_no, int(t), float(p[0]), float(p[1]), soc))
    return recs


def _duration(rng, cfg):
    if cfg.trip_duration_jitter_h > 0:
        return cfg.trip_duration_h + rng.uniform(0, cfg.trip_duration_jitter_h)
    return cfg.trip_duration_h


def _start(rng, cfg, band):
    lo, hi = cfg.bands[band]
    return lo + rng.uniform(0, hi - lo - cfg.trip_duration_h - cfg.trip_duration_jitter_h)


def _ev_vehicle(cfg: SynthConfig, vid: int, rule, out: SynthData):
    rng = np.random.default_rng([cfg.seed, vid])
    grid = cfg.grid
    prop = cfg.propensities()
    dummy = grid.no_charge_label
    home = _point_in(rng, grid.bbox, cfg.cell_margin)
    trip_no = 0
    n_bands = len(cfg.bands)
    for d in range(cfg.days):
        day = cfg.first_day + d
        m = int(rng.integers(cfg.trips_per_day[0], cfg.trips_per_day[1] + 1))
        bands = sorted(rng.choice(n_bands - 1, size=m - 1, replace=False).tolist()) + [n_bands - 1]
        origin = home
        soc = float(rng.uniform(*cfg.soc_init))
        for k, band in enumerate(bands):
            trip_no += 1
            last = k == m - 1
            oz = zone_of(grid, origin)
            planted = rng.random() < cfg.planted_frac
            if last:
                rule_label = dummy
                dest = home if planted else _point_in(rng, grid.cell_bounds(int(rng.integers(1, grid.n + 1))),
                                                     cfg.cell_margin)
                charges = False
            else:
                rdest, rcharge = rule[(oz, band)]
                rule_label = rdest if rcharge else dummy
                if planted:
                    dz, charges = rdest, rcharge
                else:
                    dz = int(rng.integers(1, grid.n + 1))
                    charges = bool(rng.random() < prop[dz - 1])
                dest = _point_in(rng, grid.cell_bounds(dz), cfg.cell_margin)

            t_start = _start(rng, cfg, band)
            duration = _duration(rng, cfg)
            pts = _path(rng, origin, dest, cfg.points_per_trip)
            soc_arr = max(1.0, soc - cfg.soc_drain_per_km * path_distance_km(pts))
            out.records.extend(_trip_records(cfg, vid, day, trip_no, t_start, duration,
                                             pts, soc, soc_arr))
            key = (vid, day, trip_no)
            out.rule_labels[key] = rule_label

            if not last:
                room = 100.0 - soc_arr
                if charges and room > 0.5:
                    jump = min(float(rng.uniform(*cfg.charge_jump)), room)
                    next_soc = soc_arr + jump
                    out.events.append(GroundTruthEvent(vid, day, trip_no, zone_of(grid, dest),
                                                       next_soc - soc_arr))
                else:
                    next_soc = max(0.0, soc_arr - float(rng.uniform(*cfg.idle_drain)))
                soc = next_soc
            origin = dest


def _icev_vehicle(cfg: SynthConfig, vid: int, out: SynthData):
    rng = np.random.default_rng([cfg.seed, vid])
    grid = cfg.grid
    b = grid.bbox
    home = _point_in(rng, b, cfg.cell_margin)
    trip_no = 0
    n_bands = len(cfg.bands)
    for d in range(cfg.days):
        day = cfg.first_day + d
        m = int(rng.integers(cfg.icev_trips_per_day[0], cfg.icev_trips_per_day[1] + 1))
        m = min(m, n_bands)
        bands = sorted(rng.choice(n_bands - 1, size=m - 1, replace=False).tolist()) + [n_bands - 1]
        origin = home
        for k, band in enumerate(bands):
            trip_no += 1
            if k == m - 1:
                dest = home
            elif rng.random() < cfg.icev_long_trip_prob:
                # occasional out-of-town trip, up to ~0.4 degrees away
                dest = (origin[0] + rng.uniform(-0.4, 0.4), origin[1] + rng.uniform(-0.4, 0.4))
            else:
                dest = _point_in(rng, b, cfg.cell_margin)
            t_start = _start(rng, cfg, band)
            pts = _path(rng, origin, dest, cfg.points_per_trip)
            out.records.extend(_trip_records(cfg, vid, day, trip_no, t_start,
                                             _duration(rng, cfg), pts, None, None))
            origin = dest


EV_ID_BASE = 100
ICEV_ID_BASE = 1000


def generate(cfg: Optional[SynthConfig] = None) -> SynthData:
    cfg = cfg or SynthConfig()
    cfg.validate()
    if cfg.n_vehicles > ICEV_ID_BASE - EV_ID_BASE:
        raise ValueError("too many EVs for the vehicle id layout")
    out = SynthData([], [], [], {}, cfg)
    rule = _rule_table(cfg)
    for i in range(cfg.n_vehicles):
        vid = EV_ID_BASE + i
        out.infos.append(VehicleInfo(vid, Powertrain.PHEV_EV))
        _ev_vehicle(cfg, vid, rule, out)
    for i in range(cfg.n_icev):
        vid = ICEV_ID_BASE + i
        out.infos.append(VehicleInfo(vid, Powertrain.ICEV))
        _icev_vehicle(cfg, vid, out)
    return out


def two_clusters(n: int = 400, d: int = 2, separation: float = 6.0, seed: int = 0):
    """Two isotropic unit-variance Gaussian blobs whose centres are ``separation`` apart.

    Returns ``(X, y, centres)`` with labels 1 and 2, half the rows each.
    """
    rng = np.random.default_rng([seed, 2])
    direction = rng.normal(size=d)
    direction /= np.linalg.norm(direction)
    centres = np.stack([-separation / 2 * direction, separation / 2 * direction])
    y = np.repeat([1.0, 2.0], [n - n // 2, n // 2])
    X = centres[(y - 1).astype(int)] + rng.normal(size=(n, d))
    order = rng.permutation(n)
    return X[order], y[order], centres
