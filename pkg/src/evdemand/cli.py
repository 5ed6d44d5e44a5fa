"""Command-line entry point: ``evdemand <subcommand> [--config FILE] [flags]``.

Every subcommand runs the stages it depends on in memory and writes its own
outputs under the configured output directory. ``report`` runs everything
and adds ``manifest.json`` with a SHA-256 per artifact.

Exit codes: 0 success, 2 configuration error, 3 data-integrity error,
4 model error. Failures print one ``CODE: message`` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import glob
import hashlib
import json
import logging
import math
import sys
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np

from evdemand import synth as synth_mod
from evdemand.behavior import BehaviorConfig, behavior_report, write_behavior
from evdemand.charging import ChargerParams, LabelReport, label_trips, to_events, write_events_csv, write_labeled_csv
from evdemand.config import PipelineConfig, load_config
from evdemand.demand import actual_events, aggregate, predict_events, write_profile_csv
from evdemand.errors import ConfigError, EvDemandError
from evdemand.evaluation import comparison_report, sweep, write_comparison_csv, write_sweeps_csv
from evdemand.features import (Table, build_dataset, retained_trips, train_test_split,
                               write_dataset_csv)
from evdemand.geo import BoundingBox, ZoneGrid, fit_bbox
from evdemand.ingest import (IngestReport, Powertrain, filter_by_powertrain, parse_dynamic,
                             parse_static)
from evdemand.models import FAMILIES, TARGETS
from evdemand.models.persist import save_predictor
from evdemand.trips import build_trips, trip_no_collisions, write_trips_csv

log = logging.getLogger("evdemand")

SUBCOMMANDS = ("ingest", "trips", "behavior", "label", "dataset", "sweep",
               "evaluate", "demand", "synth", "report")


def _write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(obj), f, indent=2, sort_keys=True, allow_nan=True)
        f.write("\n")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _open_csv(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="", encoding="utf-8")


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def read_rule_labels(path: Path) -> dict:
    with open(path, newline="", encoding="utf-8") as f:
        return {(int(r["vehicle_id"]), int(r["day_index"]), int(r["trip_no"])): int(r["rule_label"])
                for r in csv.DictReader(f)}


class Pipeline:
    """Stages computed on first access and cached; ``written`` collects output paths."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = cfg.output_dir
        self.written: list[Path] = []

    def _emit(self, path: Path) -> Path:
        if path not in self.written:
            self.written.append(path)
        return path

    # ---- inputs

    @cached_property
    def ingest_report(self) -> IngestReport:
        return IngestReport()

    @cached_property
    def infos(self):
        path = self.cfg.resolve(self.cfg.paths.static)
        with open(path, newline="", encoding="utf-8") as f:
            infos, rejected = parse_static(f, self.cfg.schema.static, self.ingest_report)
        if rejected:
            log.warning("%d static rows with unknown vehicle types skipped", rejected)
        return infos

    @cached_property
    def records(self):
        out = []
        for path in self.cfg.dynamic_files():
            with open(path, newline="", encoding="utf-8") as f:
                out.extend(parse_dynamic(f, self.cfg.schema.dynamic, self.ingest_report))
        return out

    @cached_property
    def cohorts(self) -> dict:
        ev, unknown = filter_by_powertrain(self.records, self.infos, {Powertrain.PHEV_EV})
        icev, _ = filter_by_powertrain(self.records, self.infos, {Powertrain.ICEV})
        self.ingest_report.unknown_vehicle_records = unknown
        return {"ev": ev, "icev": icev}

    def write_ingest(self):
        cohorts = self.cohorts
        by_type = {p.value: sum(1 for i in self.infos if i.powertrain == p) for p in Powertrain}
        self._emit(_write_json(self.out / "ingest_report.json", {
            **self.ingest_report.as_dict(),
            "records_kept": len(self.records),
            "vehicles_by_powertrain": by_type,
            "ev_records": len(cohorts["ev"]),
            "icev_records": len(cohorts["icev"]),
        }))

    # ---- trips and behavior

    @cached_property
    def trips(self) -> dict:
        return {name: build_trips(recs) for name, recs in self.cohorts.items()}

    def write_trips(self):
        for name, trips in self.trips.items():
            with _open_csv(self.out / f"trips_{name}.csv") as f:
                write_trips_csv(trips, f)
            self._emit(self.out / f"trips_{name}.csv")
            collisions = trip_no_collisions(trips)
            if collisions:
                log.warning("%s: %d trip numbers reused across days", name, len(collisions))

    def write_behavior(self):
        b = self.cfg.behavior
        bcfg = BehaviorConfig(b.distance_bin_km, (0.0, b.distance_max_km), b.hour_bin_h, b.max_daily_trips)
        report = behavior_report(self.trips["ev"], self.trips["icev"], bcfg)
        self._emit(_write_json(self.out / "behavior.json", {k: v.as_dict() for k, v in report.items()}))
        (self.out / "behavior").mkdir(parents=True, exist_ok=True)
        for p in write_behavior(report, self.out / "behavior"):
            self._emit(p)

    # ---- labels, events, dataset

    @cached_property
    def params(self) -> ChargerParams:
        c = self.cfg.charger
        return ChargerParams(c.cap_kwh, c.alpha_kw, c.eta,
                             {int(k): float(v) for k, v in c.cap_overrides.items()})

    @cached_property
    def grid(self) -> ZoneGrid:
        z = self.cfg.zones
        if z.bbox is not None:
            box = BoundingBox(*map(float, z.bbox))
        else:
            pts = [p for t in self.trips["ev"] for p in (t.origin, t.dest)]
            if not pts:
                raise ConfigError("zones.bbox is unset and there are no EV trips to fit it to")
            box = fit_bbox(pts)
        return ZoneGrid(box, z.rows, z.cols)

    @cached_property
    def label_report(self) -> LabelReport:
        return LabelReport()

    @cached_property
    def labeled(self):
        return label_trips(self.trips["ev"], self.grid, self.label_report)

    def write_label(self):
        labeled = self.labeled
        with _open_csv(self.out / "labeled_trips.csv") as f:
            write_labeled_csv(labeled, f)
        self._emit(self.out / "labeled_trips.csv")
        with _open_csv(self.out / "events.csv") as f:
            write_events_csv(to_events(labeled, self.params, self.grid.n), f)
        self._emit(self.out / "events.csv")
        g = self.grid
        self._emit(_write_json(self.out / "zones.json", {
            "rows": g.rows, "cols": g.cols, "n": g.n, "bbox": g.bbox.as_list(),
            "cells": {f"zone_{z}": g.cell_bounds(z).as_list() for z in range(1, g.n + 1)},
        }))
        r = self.label_report
        self._emit(_write_json(self.out / "label_report.json",
                               {"labeled": r.labeled, "events": r.events, "skipped_no_soc": r.skipped_no_soc}))

    @cached_property
    def dataset(self):
        return build_dataset(self.labeled, self.grid.n)

    @cached_property
    def dataset_keys(self) -> list[tuple]:
        return [(lt.trip.vehicle_id, lt.trip.day_index, lt.trip.trip_no)
                for lt in retained_trips(self.labeled, self.grid.n)]

    @cached_property
    def split(self):
        if not self.dataset:
            raise EvDemandError("no vehicle-day contains a charging event; nothing to model")
        s = self.cfg.split
        return train_test_split(self.dataset, s.test_frac, s.seed, s.stratify, s.validation_frac)

    def write_dataset(self):
        with _open_csv(self.out / "dataset.csv") as f:
            write_dataset_csv(self.dataset, f)
        self._emit(self.out / "dataset.csv")
        n = self.grid.n
        self._emit(_write_json(self.out / "split.json", {
            **self.split.as_dict(),
            "test_frac": self.cfg.split.test_frac, "stratify": self.cfg.split.stratify,
            "validation_frac": self.cfg.split.validation_frac,
            "charging_rows": sum(1 for _, t in self.dataset if t.label <= n),
        }))

    # ---- models

    def write_sweep(self):
        sw = self.cfg.sweep
        n_jobs = sw.rf.n_jobs
        results = [sweep(fam, tgt, sw.grids()[fam], self.split, self.grid.n, sw.fixed().get(fam), n_jobs)
                   for tgt in TARGETS for fam in FAMILIES]
        self._write_sweep_tables({tgt: {r.family: r for r in results if r.target == tgt} for tgt in TARGETS})

    def _write_sweep_tables(self, sweeps: dict):
        with _open_csv(self.out / "sweeps.csv") as f:
            write_sweeps_csv(sweeps, f)
        self._emit(self.out / "sweeps.csv")
        self._emit(_write_json(self.out / "sweeps.json",
                               {t: {f: r.as_dict() for f, r in by.items()} for t, by in sweeps.items()}))

    @cached_property
    def comparison(self):
        sw = self.cfg.sweep
        return comparison_report(self.split, sw.grids(), self.grid.n, sw.fixed(), n_jobs=sw.rf.n_jobs)

    def planted_summary(self) -> Optional[dict]:
        """Held-out accuracy against the synthetic planted-rule ceiling, when a rule table exists."""
        path = self.cfg.resolve(self.cfg.paths.rule_labels)
        if path is None or not path.is_file():
            return None
        rules = read_rule_labels(path)
        test_idx = self.split.test_idx
        keys = [self.dataset_keys[i] for i in test_idx]
        labels = [self.dataset[i][1].label for i in test_idx]
        ceiling = synth_mod.planted_ceiling(rules, keys, labels)
        rf_acc = self.comparison.scores["label"].get("rf", math.nan)
        return {"ceiling_pct": ceiling, "rf_label_accuracy_pct": rf_acc,
                "rf_to_ceiling_ratio": rf_acc / ceiling if ceiling else math.nan}

    def write_evaluate(self):
        cmp = self.comparison
        with _open_csv(self.out / "comparison.csv") as f:
            write_comparison_csv(cmp, f)
        self._emit(self.out / "comparison.csv")
        summary = cmp.as_dict()
        planted = self.planted_summary()
        if planted is not None:
            summary["planted"] = planted
        self._emit(_write_json(self.out / "comparison.json", summary))
        self._write_sweep_tables(cmp.sweeps)
        for target, by_family in cmp.predictors.items():
            for family, p in by_family.items():
                path = self.out / "models" / f"{target}_{family}.json"
                path.parent.mkdir(parents=True, exist_ok=True)
                save_predictor(p, path)
                self._emit(path)

    # ---- demand

    def demand_models(self) -> dict:
        cmp = self.comparison
        choice = self.cfg.demand.family
        return {t: cmp.predictors[t][cmp.best_family(t) if choice == "best" else choice] for t in TARGETS}

    def write_demand(self):
        d = self.cfg.demand
        n = self.grid.n
        table = Table.from_rows(self.split.rows)
        test = table.take(self.split.test_idx)
        models = self.demand_models()
        families = {t: p.family for t, p in models.items()}
        for case in sorted(set(d.cases)):
            events = predict_events(case, models, test, n, self.params)
            prof = aggregate(events, n, self.params, d.grid_side, d.impulse_binning, case=f"case{case}")
            prof.meta["families"] = families
            self._write_profile(prof, f"demand_case{case}")
        events = actual_events(test, n, self.params)
        prof = aggregate(events, n, self.params, d.grid_side, d.impulse_binning, case="test_actual")
        self._write_profile(prof, "demand_test")

    def _write_profile(self, prof, stem: str):
        with _open_csv(self.out / f"{stem}.csv") as f:
            write_profile_csv(prof, f)
        self._emit(self.out / f"{stem}.csv")
        self._emit(_write_json(self.out / f"{stem}.json", prof.as_dict()))

    # ---- manifest

    def write_manifest(self) -> Path:
        files = sorted(p for p in self.written if p.is_file())
        entries = [{"path": p.relative_to(self.out).as_posix(), "sha256": sha256_file(p),
                    "bytes": p.stat().st_size} for p in files]
        entries.sort(key=lambda e: e["path"])
        cfg_text = json.dumps(_jsonable(self.cfg.as_dict()), sort_keys=True)
        return _write_json(self.out / "manifest.json", {
            "artifacts": entries,
            "config_sha256": hashlib.sha256(cfg_text.encode()).hexdigest(),
        })


def run_synth(cfg: PipelineConfig) -> list[Path]:
    s = cfg.synth
    z = cfg.zones
    box = BoundingBox(*map(float, z.bbox)) if z.bbox is not None else synth_mod.DEFAULT_BBOX
    try:
        scfg = synth_mod.SynthConfig(
            n_vehicles=s.n_vehicles, n_icev=s.n_icev, days=s.days, seed=s.seed,
            grid=ZoneGrid(box, z.rows, z.cols), propensity=s.propensity, planted_frac=s.planted_frac,
            trip_duration_h=s.trip_duration_h, trip_duration_jitter_h=s.trip_duration_jitter_h)
        data = synth_mod.generate(scfg)
    except ValueError as exc:
        raise ConfigError(f"synth: {exc}") from exc

    static = cfg.resolve(cfg.paths.static)
    dynamic = cfg.resolve(cfg.paths.dynamic)
    if glob.has_magic(str(dynamic)):
        raise ConfigError("synth needs paths.dynamic to be a single file, not a glob")
    written = []
    for path, text in ((static, data.static_csv(cfg.schema.static)),
                       (dynamic, data.dynamic_csv(cfg.schema.dynamic))):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        written.append(path)
    side = dynamic.parent
    with _open_csv(side / "ground_truth_events.csv") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["vehicle_id", "day_index", "trip_no", "zone", "soc_req"])
        for e in data.events:
            w.writerow([e.vehicle_id, e.day_index, e.trip_no, e.zone, repr(e.soc_req)])
    written.append(side / "ground_truth_events.csv")
    rules = cfg.resolve(cfg.paths.rule_labels) or side / "rule_labels.csv"
    with _open_csv(rules) as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["vehicle_id", "day_index", "trip_no", "rule_label"])
        for (vid, day, trip), label in sorted(data.rule_labels.items()):
            w.writerow([vid, day, trip, label])
    written.append(rules)
    log.info("synthetic fleet: %d records, %d ground-truth events", len(data.records), len(data.events))
    return written


def _parse_zones(text: str) -> tuple[int, int]:
    try:
        r, c = text.lower().split("x")
        rows, cols = int(r), int(c)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROWSxCOLS, got {text!r}") from None
    if rows < 1 or cols < 1:
        raise argparse.ArgumentTypeError("zone grid dimensions must be >= 1")
    return rows, cols


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config (default: $EVDEMAND_CONFIG, else built-in defaults)")
    common.add_argument("--out", help="output directory (overrides paths.output_dir)")
    common.add_argument("--seed", type=int, help="split seed; for `synth` the generator seed")
    common.add_argument("--zones", type=_parse_zones, metavar="RxC", help="zone grid, e.g. 3x3")
    common.add_argument("--case", choices=["1", "2", "both"], help="demand case(s) to synthesize")
    common.add_argument("--validation-frac", type=float, help="carve a validation split for tuning")
    common.add_argument("--stratify", action="store_true", default=None, help="stratify the split by label")
    common.add_argument("--grid-side", action="store_true", default=None,
                        help="bin grid-side energy (cd / eta) instead of battery energy")
    common.add_argument("--impulse-binning", action="store_true", default=None,
                        help="put each event's energy in its start hour")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog="evdemand",
        description="Trips, charging events, zone/end-time/SOC models and zonal charging demand from GPS/SOC traces.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "ingest": "parse and validate the static and dynamic CSVs",
        "trips": "segment records into per-trip summaries",
        "behavior": "EV vs ICEV travel-behavior histograms",
        "label": "detect charging events and label trips with zones",
        "dataset": "build the model table and the train/test split",
        "sweep": "hyperparameter sweeps for every family and target",
        "evaluate": "tune and score every family and target on the test rows",
        "demand": "forecast zonal hourly charging demand",
        "synth": "write a seeded synthetic fleet to the configured input paths",
        "report": "run every stage and write a hashed manifest",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def apply_overrides(cfg: PipelineConfig, args) -> PipelineConfig:
    if args.out is not None:
        cfg.paths.output_dir = str(Path(args.out).resolve())
    if args.seed is not None:
        if args.command == "synth":
            cfg.synth.seed = args.seed
        else:
            cfg.split.seed = args.seed
    if args.zones is not None:
        cfg.zones.rows, cfg.zones.cols = args.zones
    if args.case is not None:
        cfg.demand.cases = [1, 2] if args.case == "both" else [int(args.case)]
    if args.validation_frac is not None:
        cfg.split.validation_frac = args.validation_frac
    if args.stratify:
        cfg.split.stratify = True
    if args.grid_side:
        cfg.demand.grid_side = True
    if args.impulse_binning:
        cfg.demand.impulse_binning = True
    cfg.validate()
    return cfg


def run(command: str, cfg: PipelineConfig) -> list[Path]:
    """Run one subcommand; returns the files it wrote."""
    if command == "synth":
        return run_synth(cfg)
    cfg.check_inputs()
    cfg.check_output()
    p = Pipeline(cfg)
    steps = {
        "ingest": [p.write_ingest],
        "trips": [p.write_trips],
        "behavior": [p.write_behavior],
        "label": [p.write_label],
        "dataset": [p.write_dataset],
        "sweep": [p.write_sweep],
        "evaluate": [p.write_evaluate],
        "demand": [p.write_demand],
        "report": [p.write_ingest, p.write_trips, p.write_behavior, p.write_label,
                   p.write_dataset, p.write_evaluate, p.write_demand],
    }[command]
    for step in steps:
        step()
    if command == "report":
        p.write_manifest()
        p.written.append(p.out / "manifest.json")
    return p.written


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = apply_overrides(load_config(args.config), args)
        for path in run(args.command, cfg):
            print(path)
    except EvDemandError as exc:
        print(f"{exc.code}: {' '.join(str(exc).split())}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
