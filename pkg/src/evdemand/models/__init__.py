"""From-scratch KNN, CART and random-forest learners plus a table-level wrapper."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from evdemand.errors import ModelError
from evdemand.features import FEATURE_NAMES, FeatureEncoder, Table
from evdemand.models.forest import RandomForest, rf_fit, rf_predict
from evdemand.models.knn import CLASSIFY, REGRESS, KnnModel, knn_fit, knn_predict
from evdemand.models.tree import DecisionTree, dt_fit, dt_predict

FAMILIES = ("knn", "dt", "rf")

TARGETS = {
    "label": (CLASSIFY, FEATURE_NAMES),
    "t_end": (REGRESS, FEATURE_NAMES),
    # the charge amount is predicted for a known (or predicted) zone
    "soc_req": (REGRESS, FEATURE_NAMES + ("label",)),
}


@dataclass
class Predictor:
    """A fitted model plus the encoding that feeds it, for one target column."""

    family: str
    target: str
    task: str
    params: dict
    encoder: FeatureEncoder
    model: object = None
    metadata: dict = field(default_factory=dict)

    @classmethod
    def create(cls, family: str, target: str, **params) -> "Predictor":
        if family not in FAMILIES:
            raise ModelError(f"unknown model family {family!r}")
        if target not in TARGETS:
            raise ModelError(f"unknown target {target!r}")
        task, names = TARGETS[target]
        return cls(family, target, task, params, FeatureEncoder(names, one_hot=family == "knn"))

    def fit(self, table: Table) -> "Predictor":
        if len(table) == 0:
            raise ModelError(f"no training rows for target {self.target!r}")
        try:
            self.encoder.fit(table)
        except ValueError as exc:
            raise ModelError(f"{self.family}/{self.target}: {exc}") from exc
        X = self.encoder.transform(table)
        y = table[self.target]
        p = self.params
        if self.family == "knn":
            self.model = knn_fit(X, y, k=p.get("k", 5), task=self.task)
        elif self.family == "dt":
            self.model = dt_fit(X, y, max_depth=p.get("max_depth", 8),
                                min_leaf=p.get("min_leaf", 1), task=self.task)
        else:
            self.model = rf_fit(X, y, n_trees=p.get("n_trees", 100), max_depth=p.get("max_depth", 8),
                                mtry=p.get("mtry"), base_seed=p.get("base_seed", 0), task=self.task,
                                min_leaf=p.get("min_leaf", 1), n_jobs=p.get("n_jobs", 1))
        self.metadata["n_train"] = len(table)
        return self

    def predict(self, table: Table) -> np.ndarray:
        if self.model is None:
            raise ModelError(f"{self.family} model for {self.target!r} is not fitted")
        if len(table) == 0:
            return np.empty(0)
        X = self.encoder.transform(table)
        if self.family == "knn":
            return knn_predict(self.model, X)
        if self.family == "dt":
            return dt_predict(self.model, X)
        return rf_predict(self.model, X)


__all__ = [
    "CLASSIFY", "REGRESS", "FAMILIES", "TARGETS", "Predictor",
    "KnnModel", "knn_fit", "knn_predict",
    "DecisionTree", "dt_fit", "dt_predict",
    "RandomForest", "rf_fit", "rf_predict",
]
