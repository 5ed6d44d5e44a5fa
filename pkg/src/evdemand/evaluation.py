"""Metrics, hyperparameter sweeps and the family x target comparison table."""

from __future__ import annotations

import csv
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, TextIO

import numpy as np

from evdemand.errors import ModelError
from evdemand.features import SplitDataset, Table
from evdemand.models import FAMILIES, TARGETS, Predictor

log = logging.getLogger(__name__)


def accuracy(pred, truth) -> float:
    """Percentage of exact matches."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if len(pred) != len(truth):
        raise ValueError(f"length mismatch: {len(pred)} predictions, {len(truth)} truths")
    if len(pred) == 0:
        raise ValueError("accuracy of an empty vector is undefined")
    return 100.0 * float(np.count_nonzero(pred == truth)) / len(pred)


def rmse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if len(pred) != len(truth):
        raise ValueError(f"length mismatch: {len(pred)} predictions, {len(truth)} truths")
    if len(pred) == 0:
        raise ValueError("RMSE of an empty vector is undefined")
    return math.sqrt(float(np.mean((pred - truth) ** 2)))


def confusion_matrix(pred, truth, labels: Sequence[int]) -> list[list[int]]:
    """Rows are true labels, columns predicted labels, both in ``labels`` order."""
    pos = {int(l): i for i, l in enumerate(labels)}
    m = [[0] * len(labels) for _ in labels]
    for p, t in zip(pred, truth):
        m[pos[int(t)]][pos[int(p)]] += 1
    return m


def higher_is_better(target: str) -> bool:
    return target == "label"


def score(target: str, pred, truth) -> float:
    return accuracy(pred, truth) if higher_is_better(target) else rmse(pred, truth)


def target_table(table: Table, target: str, n_zones: int) -> Table:
    """Rows a target is trained and scored on: ``soc_req`` only uses charging trips."""
    if target == "soc_req":
        return table.take(np.flatnonzero(table["label"] <= n_zones))
    return table


# primary tuned hyperparameter per family
TUNED_PARAM = {"knn": "k", "dt": "max_depth", "rf": "max_depth"}


@dataclass
class SweepResult:
    family: str
    target: str
    grid: dict
    settings: list = field(default_factory=list)
    scores: list = field(default_factory=list)
    chosen: Optional[dict] = None
    chosen_score: Optional[float] = None
    # the predictor fitted with the chosen setting on the training rows
    predictor: Optional[Predictor] = field(default=None, repr=False)

    def as_dict(self):
        return {"family": self.family, "target": self.target, "grid": self.grid,
                "settings": self.settings, "scores": self.scores,
                "chosen": self.chosen, "chosen_score": self.chosen_score}


def expand_grid(grid: dict) -> list[dict]:
    if not grid:
        raise ValueError("empty parameter grid")
    keys = sorted(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def sweep(family: str, target: str, grid: dict, split: SplitDataset, n_zones: int,
          fixed: Optional[dict] = None, n_jobs: int = 1) -> SweepResult:
    """Train on the training rows for each grid setting and score on the evaluation rows.

    The best setting maximizes accuracy (label) or minimizes RMSE; ties go to
    the smallest parameter values. Settings that cannot be fitted (e.g. ``k``
    larger than the training set) score NaN and are never chosen.
    """
    fixed = dict(fixed or {})
    table = Table.from_rows(split.rows)
    train = target_table(table.take(split.train_idx), target, n_zones)
    held = target_table(table.take(split.eval_idx), target, n_zones)
    result = SweepResult(family, target, {k: list(v) for k, v in grid.items()})

    def evaluate(setting):
        try:
            p = Predictor.create(family, target, **fixed, **setting).fit(train)
            return (score(target, p.predict(held), held[target]) if len(held) else math.nan), p
        except ModelError as exc:
            log.warning("%s/%s %s skipped: %s", family, target, setting, exc)
            return math.nan, None

    settings = expand_grid(grid)
    if n_jobs == 1:
        outcomes = [evaluate(s) for s in settings]
    else:
        # settings are independent; map() keeps the grid order
        with ThreadPoolExecutor(max_workers=n_jobs if n_jobs > 0 else None) as pool:
            outcomes = list(pool.map(evaluate, settings))
    result.settings = settings
    result.scores = [s for s, _ in outcomes]

    keys = sorted(grid)
    best = None
    for (s, p), setting in zip(outcomes, settings):
        if math.isnan(s):
            continue
        rank = (-s if higher_is_better(target) else s, tuple(setting[k] for k in keys))
        if best is None or rank < best[0]:
            best = (rank, setting, s, p)
    if best is None:
        raise ModelError(f"no usable setting in the {family}/{target} sweep")
    result.chosen, result.chosen_score, result.predictor = best[1], best[2], best[3]
    return result


@dataclass
class Comparison:
    """Held-out scores for each (target, family) pair, tuned by sweeps."""

    scores: dict
    sweeps: dict
    predictors: dict
    confusion: dict = field(default_factory=dict)

    def best_family(self, target: str) -> str:
        fams = [f for f in FAMILIES if f in self.scores[target] and not math.isnan(self.scores[target][f])]
        key = (lambda f: -self.scores[target][f]) if higher_is_better(target) else (lambda f: self.scores[target][f])
        return min(fams, key=lambda f: (key(f), FAMILIES.index(f)))

    def as_dict(self):
        return {
            "scores": self.scores,
            "best": {t: self.best_family(t) for t in self.scores},
            "chosen": {t: {f: self.sweeps[t][f].chosen for f in self.sweeps[t]} for t in self.sweeps},
            "confusion": self.confusion,
        }


def comparison_report(split: SplitDataset, grids: dict, n_zones: int,
                      fixed: Optional[dict] = None, families=FAMILIES,
                      targets=tuple(TARGETS), n_jobs: int = 1) -> Comparison:
    """Tune every family per target and score the chosen setting on the test rows.

    The chosen model is the one the sweep already fitted on the training rows.

    ``grids[family]`` maps parameter names to candidate lists; ``fixed[family]``
    holds non-tuned parameters (forest size, seed).
    """
    fixed = fixed or {}
    table = Table.from_rows(split.rows)
    test_all = table.take(split.test_idx)
    scores, sweeps, predictors, confusion = {}, {}, {}, {}
    for target in targets:
        scores[target], sweeps[target], predictors[target] = {}, {}, {}
        test = target_table(test_all, target, n_zones)
        for family in families:
            sw = sweep(family, target, grids[family], split, n_zones, fixed.get(family), n_jobs)
            p = sw.predictor
            pred = p.predict(test)
            scores[target][family] = score(target, pred, test[target]) if len(test) else math.nan
            sweeps[target][family] = sw
            predictors[target][family] = p
            if target == "label" and len(test):
                labels = list(range(1, n_zones + 2))
                confusion[family] = {"labels": labels,
                                     "matrix": confusion_matrix(pred, test["label"], labels)}
    return Comparison(scores, sweeps, predictors, confusion)


def write_comparison_csv(cmp: Comparison, out: TextIO) -> None:
    families = [f for f in FAMILIES if any(f in row for row in cmp.scores.values())]
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["target", "metric"] + families)
    for target, row in cmp.scores.items():
        metric = "accuracy_pct" if higher_is_better(target) else "rmse"
        w.writerow([target, metric] + [repr(float(row[f])) for f in families])


def write_sweeps_csv(sweeps: dict, out: TextIO) -> None:
    """``sweeps[target][family]`` is a SweepResult; one row per grid setting."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["target", "family", "setting", "score", "chosen"])
    for target, by_family in sweeps.items():
        for family, sw in by_family.items():
            for setting, s in zip(sw.settings, sw.scores):
                setting_str = ";".join(f"{k}={v}" for k, v in sorted(setting.items()))
                w.writerow([target, family, setting_str, repr(float(s)), int(setting == sw.chosen)])
