"""JSON model files.

Schema (``format = "evdemand-model"``, ``version = 1``)::

    {
      "format": "evdemand-model", "version": 1,
      "family": "knn" | "dt" | "rf", "target": str, "task": "classify" | "regress",
      "params": {...hyperparameters...},
      "encoder": {"names": [...], "one_hot": bool, "categories": {...},
                  "scaler": {"mean": [...], "std": [...]} | null},
      "model": {...family-specific state...},
      "metadata": {...free-form training metadata...}
    }

Floats are stored by JSON's shortest round-trip repr, so loading a saved
model reproduces its predictions bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from evdemand.errors import ModelError
from evdemand.features import FeatureEncoder
from evdemand.models.forest import RandomForest
from evdemand.models.knn import KnnModel
from evdemand.models.tree import DecisionTree

FORMAT = "evdemand-model"
VERSION = 1


def _tree_to_dict(t: DecisionTree) -> dict:
    return {
        "task": t.task, "max_depth": t.max_depth, "min_leaf": t.min_leaf,
        "classes": None if t.classes is None else t.classes.tolist(),
        "feature": t.feature.tolist(), "threshold": t.threshold.tolist(),
        "left": t.left.tolist(), "right": t.right.tolist(),
        "value": t.value.tolist(), "n_samples": t.n_samples.tolist(),
    }


def _tree_from_dict(d: dict) -> DecisionTree:
    classify = d["classes"] is not None
    return DecisionTree(
        task=d["task"], max_depth=d["max_depth"], min_leaf=d["min_leaf"],
        classes=np.array(d["classes"], dtype=float) if classify else None,
        feature=np.array(d["feature"], dtype=np.int64), threshold=np.array(d["threshold"], dtype=float),
        left=np.array(d["left"], dtype=np.int64), right=np.array(d["right"], dtype=np.int64),
        value=np.array(d["value"], dtype=float).reshape(len(d["feature"]), -1) if classify
        else np.array(d["value"], dtype=float),
        n_samples=np.array(d["n_samples"], dtype=np.int64),
    )


def model_to_dict(model) -> dict:
    if isinstance(model, KnnModel):
        return {"X": model.X.tolist(), "y": model.y.tolist(), "k": model.k, "task": model.task,
                "n_features": model.X.shape[1]}
    if isinstance(model, DecisionTree):
        return _tree_to_dict(model)
    if isinstance(model, RandomForest):
        return {
            "task": model.task, "n_trees": model.n_trees, "max_depth": model.max_depth,
            "mtry": model.mtry, "base_seed": model.base_seed, "min_leaf": model.min_leaf,
            "bootstrap": model.bootstrap,
            "classes": None if model.classes is None else model.classes.tolist(),
            "trees": [_tree_to_dict(t) for t in model.trees],
        }
    raise ModelError(f"cannot serialize {type(model).__name__}")


def model_from_dict(family: str, d: dict):
    if family == "knn":
        X = np.array(d["X"], dtype=float).reshape(-1, d["n_features"])
        return KnnModel(X, np.array(d["y"], dtype=float), d["k"], d["task"])
    if family == "dt":
        return _tree_from_dict(d)
    if family == "rf":
        return RandomForest(
            task=d["task"], n_trees=d["n_trees"], max_depth=d["max_depth"], mtry=d["mtry"],
            base_seed=d["base_seed"], min_leaf=d["min_leaf"], bootstrap=d["bootstrap"],
            classes=None if d["classes"] is None else np.array(d["classes"], dtype=float),
            trees=[_tree_from_dict(t) for t in d["trees"]],
        )
    raise ModelError(f"unknown model family {family!r}")


def predictor_to_dict(p) -> dict:
    return {
        "format": FORMAT, "version": VERSION,
        "family": p.family, "target": p.target, "task": p.task,
        "params": dict(p.params),
        "encoder": p.encoder.as_dict(),
        "model": model_to_dict(p.model),
        "metadata": dict(p.metadata),
    }


def predictor_from_dict(d: dict):
    from evdemand.models import Predictor

    if d.get("format") != FORMAT:
        raise ModelError(f"not an {FORMAT} file")
    if d.get("version") != VERSION:
        raise ModelError(f"unsupported model file version {d.get('version')!r}")
    return Predictor(
        family=d["family"], target=d["target"], task=d["task"], params=dict(d["params"]),
        encoder=FeatureEncoder.from_dict(d["encoder"]),
        model=model_from_dict(d["family"], d["model"]),
        metadata=dict(d.get("metadata", {})),
    )


def save_predictor(p, path) -> None:
    Path(path).write_text(json.dumps(predictor_to_dict(p), sort_keys=True))


def load_predictor(path):
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from exc
    return predictor_from_dict(d)
