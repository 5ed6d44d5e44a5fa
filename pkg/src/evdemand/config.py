"""Pipeline configuration: one versioned YAML tree, validated before any stage runs."""

from __future__ import annotations

import dataclasses
import glob
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from evdemand.errors import ConfigError
from evdemand.ingest import SYNTH_DYNAMIC_SCHEMA, SYNTH_STATIC_SCHEMA

CONFIG_VERSION = 1
CONFIG_ENV = "EVDEMAND_CONFIG"
DEMAND_FAMILIES = ("best", "knn", "dt", "rf")


@dataclass
class PathsConfig:
    static: str = "out/synth/static.csv"
    # a single file or a glob pattern; matches are read in sorted order
    dynamic: str = "out/synth/dynamic.csv"
    output_dir: str = "out"
    # optional planted-rule table written by ``synth``; enables the ceiling check
    rule_labels: Optional[str] = "out/synth/rule_labels.csv"


@dataclass
class SchemaConfig:
    dynamic: dict = field(default_factory=lambda: dict(SYNTH_DYNAMIC_SCHEMA))
    static: dict = field(default_factory=lambda: dict(SYNTH_STATIC_SCHEMA))


@dataclass
class ZonesConfig:
    rows: int = 3
    cols: int = 3
    # [lat_min, lat_max, lon_min, lon_max]; None fits the EV-trip extent
    bbox: Optional[list] = field(default_factory=lambda: [42.22, 42.32, -83.80, -83.66])


@dataclass
class ChargerConfig:
    cap_kwh: float = 24.0
    alpha_kw: float = 6.6
    eta: float = 0.9
    cap_overrides: dict = field(default_factory=dict)


@dataclass
class SplitConfig:
    seed: int = 0
    test_frac: float = 0.25
    stratify: bool = False
    validation_frac: float = 0.0


@dataclass
class KnnSweep:
    k: list = field(default_factory=lambda: [1, 3, 5, 7, 9, 11, 15])


@dataclass
class DtSweep:
    depth: list = field(default_factory=lambda: [2, 4, 6, 8, 10, 12, 14])
    min_leaf: int = 1


@dataclass
class RfSweep:
    depth: list = field(default_factory=lambda: [4, 6, 8, 12, 18])
    n_trees: int = 100
    base_seed: int = 0
    mtry: Optional[int] = None
    min_leaf: int = 1
    n_jobs: int = 1


@dataclass
class SweepConfig:
    knn: KnnSweep = field(default_factory=KnnSweep)
    dt: DtSweep = field(default_factory=DtSweep)
    rf: RfSweep = field(default_factory=RfSweep)

    def grids(self) -> dict:
        return {"knn": {"k": list(self.knn.k)},
                "dt": {"max_depth": list(self.dt.depth)},
                "rf": {"max_depth": list(self.rf.depth)}}

    def fixed(self) -> dict:
        return {"dt": {"min_leaf": self.dt.min_leaf},
                "rf": {"n_trees": self.rf.n_trees, "base_seed": self.rf.base_seed,
                       "mtry": self.rf.mtry, "min_leaf": self.rf.min_leaf, "n_jobs": self.rf.n_jobs}}


@dataclass
class DemandConfig:
    cases: list = field(default_factory=lambda: [1, 2])
    grid_side: bool = False
    impulse_binning: bool = False
    # model family per target used to forecast events; "best" takes the top held-out score
    family: str = "best"


@dataclass
class BehaviorSection:
    distance_bin_km: float = 5.0
    distance_max_km: float = 120.0
    hour_bin_h: float = 1.0
    max_daily_trips: int = 20


@dataclass
class SynthSection:
    n_vehicles: int = 50
    n_icev: int = 20
    days: int = 30
    seed: int = 7
    propensity: object = 0.5
    planted_frac: float = 0.9
    trip_duration_h: float = 0.4
    trip_duration_jitter_h: float = 0.0


@dataclass
class PipelineConfig:
    version: int = CONFIG_VERSION
    paths: PathsConfig = field(default_factory=PathsConfig)
    schema: SchemaConfig = field(default_factory=SchemaConfig)
    zones: ZonesConfig = field(default_factory=ZonesConfig)
    charger: ChargerConfig = field(default_factory=ChargerConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    demand: DemandConfig = field(default_factory=DemandConfig)
    behavior: BehaviorSection = field(default_factory=BehaviorSection)
    synth: SynthSection = field(default_factory=SynthSection)
    # directory relative paths are resolved against (the config file's folder)
    base_dir: str = "."

    def resolve(self, p: Optional[str]) -> Optional[Path]:
        if p is None:
            return None
        path = Path(p).expanduser()
        return path if path.is_absolute() else Path(self.base_dir) / path

    @property
    def output_dir(self) -> Path:
        return self.resolve(self.paths.output_dir)

    def dynamic_files(self) -> list[Path]:
        pattern = str(self.resolve(self.paths.dynamic))
        if glob.has_magic(pattern):
            return [Path(p) for p in sorted(glob.glob(pattern))]
        return [Path(pattern)]

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return d

    def validate(self) -> None:
        """Check value ranges; path checks are stage-dependent (see ``check_inputs``)."""
        if self.version != CONFIG_VERSION:
            raise ConfigError(f"config version {self.version} is not supported (expected {CONFIG_VERSION})")
        z = self.zones
        if z.rows < 1 or z.cols < 1:
            raise ConfigError("zones.rows and zones.cols must be >= 1")
        if z.bbox is not None:
            if len(z.bbox) != 4:
                raise ConfigError("zones.bbox must be [lat_min, lat_max, lon_min, lon_max]")
            a, b, c, d = z.bbox
            if not (a <= b and c <= d):
                raise ConfigError("zones.bbox must satisfy lat_min <= lat_max and lon_min <= lon_max")
        c = self.charger
        if not (c.cap_kwh > 0 and c.alpha_kw > 0 and 0 < c.eta <= 1):
            raise ConfigError("charger needs cap_kwh > 0, alpha_kw > 0 and 0 < eta <= 1")
        if any(v <= 0 for v in c.cap_overrides.values()):
            raise ConfigError("charger.cap_overrides capacities must be > 0")
        s = self.split
        if not 0 < s.test_frac < 1:
            raise ConfigError("split.test_frac must be in (0, 1)")
        if not 0 <= s.validation_frac < 1 - s.test_frac:
            raise ConfigError("split.validation_frac must be in [0, 1 - test_frac)")
        for name, values in (("sweep.knn.k", self.sweep.knn.k), ("sweep.dt.depth", self.sweep.dt.depth),
                             ("sweep.rf.depth", self.sweep.rf.depth)):
            if not values:
                raise ConfigError(f"{name} must be a non-empty list")
            if any(not isinstance(v, int) or isinstance(v, bool) for v in values):
                raise ConfigError(f"{name} must hold integers")
        if min(self.sweep.knn.k) < 1:
            raise ConfigError("sweep.knn.k values must be >= 1")
        if min(self.sweep.dt.depth) < 0 or min(self.sweep.rf.depth) < 0:
            raise ConfigError("tree depths must be >= 0")
        if self.sweep.rf.n_trees < 1:
            raise ConfigError("sweep.rf.n_trees must be >= 1")
        if not self.demand.cases or any(k not in (1, 2) for k in self.demand.cases):
            raise ConfigError("demand.cases must be a non-empty subset of [1, 2]")
        if self.demand.family not in DEMAND_FAMILIES:
            raise ConfigError(f"demand.family must be one of {DEMAND_FAMILIES}")
        b = self.behavior
        if b.distance_bin_km <= 0 or b.hour_bin_h <= 0 or b.distance_max_km <= 0 or b.max_daily_trips < 1:
            raise ConfigError("behavior bin widths and ranges must be positive")
        for key in ("day_num", "vehicle_id", "trip_no", "timestamp_ms", "lat", "lon"):
            if key not in self.schema.dynamic:
                raise ConfigError(f"schema.dynamic is missing {key!r}")
        for key in ("vehicle_id", "type"):
            if key not in self.schema.static:
                raise ConfigError(f"schema.static is missing {key!r}")

    def check_inputs(self) -> None:
        """Fail fast when the input CSVs are missing or unreadable."""
        static = self.resolve(self.paths.static)
        if not static.is_file() or not os.access(static, os.R_OK):
            raise ConfigError(f"static CSV not readable: {static}")
        files = self.dynamic_files()
        if not files:
            raise ConfigError(f"no dynamic CSV matches {self.paths.dynamic!r}")
        for f in files:
            if not f.is_file() or not os.access(f, os.R_OK):
                raise ConfigError(f"dynamic CSV not readable: {f}")

    def check_output(self) -> None:
        out = self.output_dir
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
        if not os.access(out, os.W_OK):
            raise ConfigError(f"output directory not writable: {out}")


def _build(cls, data, where: str):
    """Instantiate a (nested) config dataclass from a mapping, rejecting unknown keys."""
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(map(str, unknown))}")
    kwargs = {}
    for name, value in data.items():
        default = getattr(cls(), name)
        key = f"{where}.{name}" if where else name
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, key)
        else:
            kwargs[name] = _coerce(default, value, key)
    return cls(**kwargs)


def _coerce(default, value, key):
    if value is None:
        return None
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer")
        return value
    if isinstance(default, float):
        if key.endswith("propensity") and isinstance(value, list):
            return [float(v) for v in value]  # one value per zone
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number")
        return float(value)
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{key} must be a string")
    if isinstance(default, list) and not isinstance(value, list):
        raise ConfigError(f"{key} must be a list")
    if isinstance(default, dict) and not isinstance(value, dict):
        raise ConfigError(f"{key} must be a mapping")
    return value


def config_from_dict(data: dict, base_dir: str = ".") -> PipelineConfig:
    data = dict(data or {})
    data.pop("base_dir", None)
    cfg = _build(PipelineConfig, data, "")
    cfg.base_dir = str(base_dir)
    cfg.validate()
    return cfg


def load_config(path=None) -> PipelineConfig:
    """Load ``path``, else the file named by ``$EVDEMAND_CONFIG``, else built-in defaults.

    Relative paths inside a config file are resolved against the file's folder.
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        return config_from_dict({}, base_dir=".")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {str(exc).splitlines()[0]}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping at the top level")
    return config_from_dict(data or {}, base_dir=str(path.parent.resolve()))


def dump_config(cfg: PipelineConfig) -> str:
    return yaml.safe_dump(cfg.as_dict(), sort_keys=False)
