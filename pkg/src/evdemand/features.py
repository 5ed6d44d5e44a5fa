"""Model tables, train/test splits, and feature encodings."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, TextIO

import numpy as np

from evdemand.charging import LabeledTrip

FEATURE_NAMES = ("vehicle_id", "t_start", "soc_dep", "origin_lat", "origin_lon")
TARGET_NAMES = ("label", "t_end", "soc_req")
CATEGORICAL = ("vehicle_id", "label")


class FeatureRow(NamedTuple):
    vehicle_id: int
    t_start: float
    soc_dep: float
    origin_lat: float
    origin_lon: float


class TargetRow(NamedTuple):
    label: int
    t_end: float
    soc_req: float


def retained_trips(labeled: Sequence[LabeledTrip], n_zones: Optional[int] = None) -> list[LabeledTrip]:
    """Labeled trips on vehicle-days with at least one charge, in input order.

    A trip counts as a charging event when its label is a real zone
    (``label <= n_zones``); without ``n_zones`` a positive ``soc_req`` decides.
    """
    def is_event(lt):
        if n_zones is not None:
            return lt.label <= n_zones
        return lt.soc_req > 0

    charging_days = {(lt.trip.vehicle_id, lt.trip.day_index) for lt in labeled if is_event(lt)}
    return [lt for lt in labeled if (lt.trip.vehicle_id, lt.trip.day_index) in charging_days]


def build_dataset(labeled: Sequence[LabeledTrip],
                  n_zones: Optional[int] = None) -> list[tuple[FeatureRow, TargetRow]]:
    """Feature/target pairs for every trip on a vehicle-day with at least one charge."""
    rows = []
    for lt in retained_trips(labeled, n_zones):
        t = lt.trip
        rows.append((FeatureRow(t.vehicle_id, t.t_start, t.soc_dep, t.origin.lat, t.origin.lon),
                     TargetRow(lt.label, t.t_end, lt.soc_req)))
    return rows


@dataclass
class Table:
    """Column-oriented view of the dataset rows."""

    columns: dict

    @classmethod
    def from_rows(cls, rows):
        cols = {}
        for i, name in enumerate(FEATURE_NAMES):
            cols[name] = np.array([r[0][i] for r in rows], dtype=float)
        for i, name in enumerate(TARGET_NAMES):
            cols[name] = np.array([r[1][i] for r in rows], dtype=float)
        return cls(cols)

    def __len__(self):
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def __getitem__(self, name):
        return self.columns[name]

    def take(self, idx):
        idx = np.asarray(idx, dtype=int)
        return Table({k: v[idx] for k, v in self.columns.items()})

    def matrix(self, names):
        return np.column_stack([self.columns[n] for n in names]) if names else np.empty((len(self), 0))


DATASET_COLUMNS = list(FEATURE_NAMES) + list(TARGET_NAMES)


def write_dataset_csv(rows, out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(DATASET_COLUMNS)
    for f, t in rows:
        w.writerow([f.vehicle_id, repr(f.t_start), repr(f.soc_dep), repr(f.origin_lat),
                    repr(f.origin_lon), t.label, repr(t.t_end), repr(t.soc_req)])


def read_dataset_csv(stream: TextIO):
    rows = []
    for r in csv.DictReader(stream):
        rows.append((FeatureRow(int(r["vehicle_id"]), float(r["t_start"]), float(r["soc_dep"]),
                                float(r["origin_lat"]), float(r["origin_lon"])),
                     TargetRow(int(r["label"]), float(r["t_end"]), float(r["soc_req"]))))
    return rows


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class SplitDataset:
    rows: list
    train_idx: list[int]
    test_idx: list[int]
    seed: int
    val_idx: list[int] = field(default_factory=list)

    @property
    def eval_idx(self) -> list[int]:
        """Rows used to score hyperparameter settings."""
        return self.val_idx if self.val_idx else self.test_idx

    def as_dict(self):
        return {"seed": self.seed, "n_rows": len(self.rows), "train_idx": self.train_idx,
                "test_idx": self.test_idx, "val_idx": self.val_idx}


def train_test_split(rows, test_frac: float = 0.25, seed: int = 0, stratify: bool = False,
                     validation_frac: float = 0.0) -> SplitDataset:
    """Seeded shuffle; the first ``round(test_frac * N)`` shuffled indices form the test set.

    With ``validation_frac > 0`` a validation set of ``round(validation_frac * N)``
    is carved out next, from what would otherwise be training rows.
    With ``stratify`` the same rule is applied within each label class.
    """
    n = len(rows)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    if not 0 < test_frac < 1:
        raise ValueError(f"test_frac must be in (0, 1), got {test_frac}")
    if not 0 <= validation_frac < 1 - test_frac:
        raise ValueError(f"validation_frac must be in [0, {1 - test_frac}), got {validation_frac}")
    rng = np.random.default_rng(seed)

    if stratify:
        labels = np.array([r[1].label for r in rows])
        groups = [np.flatnonzero(labels == c) for c in np.unique(labels)]
    else:
        groups = [np.arange(n)]

    test, val, train = [], [], []
    for members in groups:
        perm = members[rng.permutation(len(members))]
        n_test = round_half_up(test_frac * len(members))
        n_val = round_half_up(validation_frac * len(members))
        test.extend(perm[:n_test].tolist())
        val.extend(perm[n_test:n_test + n_val].tolist())
        train.extend(perm[n_test + n_val:].tolist())
    return SplitDataset(rows, sorted(train), sorted(test), seed, sorted(val))


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def as_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float))


def fit_scaler(X) -> Scaler:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if len(X) < 2:
        raise ValueError("need at least two training rows to fit a scaler")
    return Scaler(X.mean(axis=0), X.std(axis=0))


def apply_scaler(scaler: Scaler, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[:, None]
    safe = np.where(scaler.std > 0, scaler.std, 1.0)
    Z = np.where(scaler.std > 0, (X - scaler.mean) / safe, 0.0)
    return Z[:, 0] if squeeze else Z


@dataclass
class FeatureEncoder:
    """Turns named table columns into a model matrix.

    ``one_hot=True`` (used for KNN) expands categorical columns into
    indicator columns over the categories seen at fit time and z-scores the
    numeric ones. Otherwise columns pass through unchanged, which is all the
    tree models need.
    """

    names: tuple
    one_hot: bool = False
    categories: dict = field(default_factory=dict)
    scaler: Optional[Scaler] = None

    @property
    def numeric(self):
        return [n for n in self.names if not (self.one_hot and n in CATEGORICAL)]

    def fit(self, table: Table) -> "FeatureEncoder":
        if self.one_hot:
            self.categories = {n: np.unique(table[n]).tolist() for n in self.names if n in CATEGORICAL}
            self.scaler = fit_scaler(table.matrix(self.numeric))
        return self

    def transform(self, table: Table) -> np.ndarray:
        if not self.one_hot:
            return table.matrix(list(self.names))
        parts = [apply_scaler(self.scaler, table.matrix(self.numeric))]
        for name, cats in self.categories.items():
            col = table[name]
            parts.append((col[:, None] == np.asarray(cats, dtype=float)[None, :]).astype(float))
        return np.hstack(parts)

    def as_dict(self):
        return {"names": list(self.names), "one_hot": self.one_hot,
                "categories": {k: list(v) for k, v in self.categories.items()},
                "scaler": self.scaler.as_dict() if self.scaler is not None else None}

    @classmethod
    def from_dict(cls, d):
        scaler = Scaler.from_dict(d["scaler"]) if d.get("scaler") else None
        return cls(tuple(d["names"]), d["one_hot"], dict(d["categories"]), scaler)
