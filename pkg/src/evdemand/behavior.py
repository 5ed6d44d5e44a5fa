"""EV vs ICEV travel-behavior distributions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from evdemand.trips import Trip, daily_trip_counts


@dataclass
class Histogram:
    bin_edges: list[float]
    counts: list[int]
    total: int
    out_of_range: int = 0

    def rows(self):
        return [(lo, hi, c) for lo, hi, c in zip(self.bin_edges, self.bin_edges[1:], self.counts)]

    def as_dict(self):
        return {"bin_edges": self.bin_edges, "counts": self.counts,
                "total": self.total, "out_of_range": self.out_of_range}


def histogram(values: Sequence[float], bin_width: float, value_range=(0.0, 24.0)) -> Histogram:
    """Uniform half-open bins ``[lo + k*w, lo + (k+1)*w)`` covering ``[lo, hi)``."""
    lo, hi = value_range
    if not bin_width > 0:
        raise ValueError(f"bin width must be positive, got {bin_width}")
    if not lo < hi:
        raise ValueError(f"empty range [{lo}, {hi})")
    nbins = math.ceil((hi - lo) / bin_width - 1e-9)
    edges = [lo + k * bin_width for k in range(nbins)] + [hi]
    counts = [0] * nbins
    outside = 0
    for v in values:
        if not lo <= v < hi:
            outside += 1
            continue
        k = min(int((v - lo) // bin_width), nbins - 1)
        # guard against the division landing one bin off an edge
        if v < edges[k]:
            k -= 1
        elif v >= edges[k + 1]:
            k += 1
        counts[k] += 1
    return Histogram(edges, counts, total=len(values), out_of_range=outside)


@dataclass
class BehaviorConfig:
    distance_bin_km: float = 5.0
    distance_range: tuple = (0.0, 120.0)
    hour_bin: float = 1.0
    max_daily_trips: int = 20


@dataclass
class CohortSummary:
    trip_count: int
    max_distance_km: float
    histograms: dict = field(default_factory=dict)

    def as_dict(self):
        return {"trip_count": self.trip_count,
                "max_distance_km": self.max_distance_km,
                "histograms": {k: h.as_dict() for k, h in self.histograms.items()}}


def summarize_cohort(trips: Sequence[Trip], cfg: BehaviorConfig = BehaviorConfig()) -> CohortSummary:
    per_day = list(daily_trip_counts(trips).values())
    hists = {
        "distance": histogram([t.distance_km for t in trips], cfg.distance_bin_km, cfg.distance_range),
        "start_hour": histogram([t.t_start % 24 for t in trips], cfg.hour_bin, (0.0, 24.0)),
        "end_hour": histogram([t.t_end % 24 for t in trips], cfg.hour_bin, (0.0, 24.0)),
        "daily_trips": histogram(per_day, 1.0, (1.0, cfg.max_daily_trips + 1.0)),
    }
    return CohortSummary(
        trip_count=len(trips),
        max_distance_km=max((t.distance_km for t in trips), default=0.0),
        histograms=hists,
    )


def behavior_report(ev_trips: Sequence[Trip], icev_trips: Sequence[Trip],
                    cfg: BehaviorConfig = BehaviorConfig()) -> dict[str, CohortSummary]:
    return {"ev": summarize_cohort(ev_trips, cfg), "icev": summarize_cohort(icev_trips, cfg)}


def write_behavior(report: dict[str, CohortSummary], out_dir: Path) -> list[Path]:
    """One ``<cohort>_<metric>.csv`` per histogram with columns bin_lo, bin_hi, count."""
    written = []
    for cohort, summary in report.items():
        for metric, hist in summary.histograms.items():
            path = out_dir / f"{cohort}_{metric}.csv"
            with open(path, "w", newline="") as f:
                w = csv.writer(f, lineterminator="\n")
                w.writerow(["bin_lo", "bin_hi", "count"])
                for lo, hi, c in hist.rows():
                    w.writerow([repr(float(lo)), repr(float(hi)), c])
            written.append(path)
    return written
