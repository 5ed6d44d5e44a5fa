"""Brute-force k-nearest neighbours."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from evdemand.errors import ModelError

CLASSIFY = "classify"
REGRESS = "regress"


@dataclass
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int
    task: str


def knn_fit(X, y, k: int, task: str = CLASSIFY) -> KnnModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ModelError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if task not in (CLASSIFY, REGRESS):
        raise ModelError(f"unknown task {task!r}")
    if not 1 <= k <= len(X):
        raise ModelError(f"k={k} must be in 1..{len(X)} (training size)")
    return KnnModel(X.copy(), y.copy(), int(k), task)


def vote(labels) -> float:
    """Most frequent label; ties go to the smallest label value."""
    values, counts = np.unique(labels, return_counts=True)
    return values[np.argmax(counts)]


def neighbours(model: KnnModel, Q, k: Optional[int] = None) -> np.ndarray:
    """Indices of the ``k`` nearest training rows per query, nearest first.

    Equal squared Euclidean distances are ordered by training-row index.
    Candidates are screened with the fast ``|q|^2 + |x|^2 - 2 q.x`` expansion
    and then ranked on exactly computed distances, so the result matches a
    full sort of ``sum((q - x)**2)``.
    """
    k = model.k if k is None else k
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    X = model.X
    n = len(X)
    x2 = np.einsum("ij,ij->i", X, X)
    out = np.empty((len(Q), k), dtype=int)
    chunk = max(1, 4_000_000 // max(1, n))
    for s in range(0, len(Q), chunk):
        q = Q[s:s + chunk]
        approx = x2[None, :] - 2.0 * q @ X.T + np.einsum("ij,ij->i", q, q)[:, None]
        kth = np.partition(approx, k - 1, axis=1)[:, k - 1]
        slack = 1e-9 * (1.0 + np.abs(approx).max(axis=1))
        for i, row in enumerate(approx):
            cand = np.flatnonzero(row <= kth[i] + slack[i])
            diff = X[cand] - q[i]
            exact = np.einsum("ij,ij->i", diff, diff)
            out[s + i] = cand[np.lexsort((cand, exact))[:k]]
    return out


def predict_from_neighbours(y: np.ndarray, idx: np.ndarray, task: str) -> np.ndarray:
    targets = y[idx]
    if task == REGRESS:
        return targets.mean(axis=1)
    return np.array([vote(row) for row in targets])


def knn_predict(model: KnnModel, Q) -> np.ndarray:
    return predict_from_neighbours(model.y, neighbours(model, Q), model.task)
