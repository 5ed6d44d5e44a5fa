"""Bagged CART forest. Tree ``i`` depends only on ``base_seed + i``."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from evdemand.errors import ModelError
from evdemand.models.knn import CLASSIFY, REGRESS, vote
from evdemand.models.tree import DecisionTree, dt_fit, dt_predict


def default_mtry(d: int, task: str) -> int:
    if task == CLASSIFY:
        return max(1, math.ceil(math.sqrt(d)))
    return max(1, math.ceil(d / 3))


@dataclass
class RandomForest:
    task: str
    n_trees: int
    max_depth: int
    mtry: int
    base_seed: int
    min_leaf: int = 1
    bootstrap: bool = True
    classes: Optional[np.ndarray] = None
    trees: list[DecisionTree] = field(default_factory=list)


def _fit_one(X, y, i, *, task, max_depth, min_leaf, mtry, base_seed, bootstrap, classes):
    rng = np.random.default_rng(base_seed + i)
    if bootstrap:
        idx = rng.integers(0, len(X), size=len(X))
        Xb, yb = X[idx], y[idx]
    else:
        Xb, yb = X, y
    return dt_fit(Xb, yb, max_depth=max_depth, min_leaf=min_leaf, task=task,
                  mtry=mtry, rng=rng, classes=classes)


def rf_fit(X, y, n_trees: int = 100, max_depth: int = 8, mtry: Optional[int] = None,
           base_seed: int = 0, task: str = CLASSIFY, min_leaf: int = 1,
           bootstrap: bool = True, n_jobs: int = 1) -> RandomForest:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if n_trees < 1:
        raise ModelError(f"n_trees must be >= 1, got {n_trees}")
    if len(X) == 0:
        raise ModelError("cannot fit a forest on zero rows")
    d = X.shape[1]
    mtry = default_mtry(d, task) if mtry is None else int(mtry)
    classes = np.unique(y) if task == CLASSIFY else None
    kw = dict(task=task, max_depth=max_depth, min_leaf=min_leaf, mtry=mtry,
              base_seed=base_seed, bootstrap=bootstrap, classes=classes)

    if n_jobs == 1:
        trees = [_fit_one(X, y, i, **kw) for i in range(n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=None if n_jobs < 1 else n_jobs) as pool:
            trees = list(pool.map(lambda i: _fit_one(X, y, i, **kw), range(n_trees)))
    return RandomForest(task, n_trees, max_depth, mtry, base_seed, min_leaf, bootstrap,
                        classes, trees)


def rf_predict(forest: RandomForest, Q) -> np.ndarray:
    per_tree = np.stack([dt_predict(t, Q) for t in forest.trees])
    if forest.task == REGRESS:
        return per_tree.mean(axis=0)
    return np.array([vote(col) for col in per_tree.T])
