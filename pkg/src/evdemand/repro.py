"""Loose-band comparison of a real-dataset run against the published figures.

Exact reproduction is out of reach: the split seed, preprocessing details and
zone geometry of the original study are unknown. Each quantity therefore
gets a tolerance band, and a miss produces a diff report rather than an error.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional


@dataclass(frozen=True)
class Band:
    name: str
    published: float
    # "rel" = +/- fraction of the published value, "abs" = +/- absolute,
    # "max" = observed must not exceed ``tol``
    kind: str
    tol: float
    unit: str = ""

    def bounds(self) -> tuple[float, float]:
        if self.kind == "rel":
            return self.published * (1 - self.tol), self.published * (1 + self.tol)
        if self.kind == "abs":
            return self.published - self.tol, self.published + self.tol
        if self.kind == "max":
            return -math.inf, self.tol
        raise ValueError(f"unknown band kind {self.kind!r}")

    def contains(self, observed: float) -> bool:
        lo, hi = self.bounds()
        return not math.isnan(observed) and lo <= observed <= hi


PUBLISHED_BANDS = (
    Band("ev_trips", 4109, "rel", 0.05, "trips"),
    Band("icev_trips", 18936, "rel", 0.05, "trips"),
    Band("retained_rows", 1062, "rel", 0.10, "rows"),
    Band("charging_rows", 446, "rel", 0.10, "rows"),
    Band("rf_label_accuracy", 73.97, "abs", 10.0, "%"),
    Band("best_t_end_rmse", 0.15, "max", 0.40, "h"),
    Band("best_soc_req_rmse", 15.55, "abs", 5.0, "SOC points"),
)


@dataclass
class BandResult:
    name: str
    published: float
    observed: Optional[float]
    lo: float
    hi: float
    ok: bool
    unit: str


def observed_from_outputs(out_dir: Path) -> dict:
    """Collect the banded quantities from a ``report`` output directory."""
    out_dir = Path(out_dir)
    cmp = json.loads((out_dir / "comparison.json").read_text())
    split = json.loads((out_dir / "split.json").read_text())
    behavior = json.loads((out_dir / "behavior.json").read_text())
    scores = cmp["scores"]
    return {
        "ev_trips": behavior["ev"]["trip_count"],
        "icev_trips": behavior["icev"]["trip_count"],
        "retained_rows": split["n_rows"],
        "charging_rows": split["charging_rows"],
        "rf_label_accuracy": scores["label"]["rf"],
        "best_t_end_rmse": min(scores["t_end"].values()),
        "best_soc_req_rmse": min(scores["soc_req"].values()),
        # informational, no band
        "ev_max_distance_km": behavior["ev"]["max_distance_km"],
        "icev_max_distance_km": behavior["icev"]["max_distance_km"],
    }


def check_bands(observed: dict, bands=PUBLISHED_BANDS) -> list[BandResult]:
    results = []
    for b in bands:
        value = observed.get(b.name)
        lo, hi = b.bounds()
        ok = value is not None and b.contains(float(value))
        results.append(BandResult(b.name, b.published, value, lo, hi, ok, b.unit))
    return results


def diff_report(results: list[BandResult]) -> str:
    lines = ["| quantity | published | observed | band | status |", "|---|---|---|---|---|"]
    for r in results:
        obs = "n/a" if r.observed is None else f"{r.observed:.4g}"
        lines.append(f"| {r.name} | {r.published:g} {r.unit} | {obs} | "
                     f"[{r.lo:.4g}, {r.hi:.4g}] | {'ok' if r.ok else 'OUTSIDE'} |")
    return "\n".join(lines) + "\n"


def write_diff_report(results: list[BandResult], out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    md = out_dir / "repro_diff.md"
    js = out_dir / "repro_diff.json"
    md.write_text(diff_report(results))
    js.write_text(json.dumps([asdict(r) for r in results], indent=2) + "\n")
    return [md, js]
