"""Greedy CART trees for classification (Gini) and regression (variance reduction)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from evdemand.errors import ModelError
from evdemand.models.knn import CLASSIFY, REGRESS

LEAF = -1


@dataclass
class DecisionTree:
    """Nodes in breadth-first order; node 0 is the root, children of a node are adjacent."""

    task: str
    max_depth: int
    min_leaf: int
    classes: Optional[np.ndarray] = None
    feature: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))  # LEAF at leaves
    threshold: np.ndarray = field(default_factory=lambda: np.empty(0))
    left: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    right: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    # class-count rows (classify) or target means (regress), one per node
    value: np.ndarray = field(default_factory=lambda: np.empty(0))
    n_samples: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        level = np.zeros(self.n_nodes, dtype=int)
        for i in np.flatnonzero(self.feature != LEAF):  # parents precede children
            level[self.left[i]] = level[self.right[i]] = level[i] + 1
        return int(level.max()) if self.n_nodes else 0

    def leaves(self) -> list[int]:
        return np.flatnonzero(self.feature == LEAF).tolist()


def _midpoints(a, b):
    m = a + (b - a) / 2.0
    # adjacent doubles: keep a <= m < b so b still goes right
    return np.where(m >= b, a, m)


def dt_fit(X, y, max_depth: int = 8, min_leaf: int = 1, task: str = CLASSIFY,
           mtry: Optional[int] = None, rng: Optional[np.random.Generator] = None,
           classes=None) -> DecisionTree:
    """Fit a CART tree, growing one depth level at a time.

    Classification maximizes the Gini decrease, regression the variance
    reduction. Candidate thresholds are midpoints between consecutive
    distinct values. Ties (within a 1e-12 relative tolerance) go to the
    lower feature index, then the lower threshold. A node stays a leaf when
    it is pure, at ``max_depth``, or cannot give both children ``min_leaf``
    rows. Zero-gain splits are allowed, so XOR-like targets are learnable.

    ``mtry`` features are drawn from ``rng`` without replacement at every
    split (all features when ``mtry`` is None). ``classes`` fixes the class
    vocabulary so count vectors line up across forest members.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ModelError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if len(X) == 0:
        raise ModelError("cannot fit a tree on zero rows")
    if task not in (CLASSIFY, REGRESS):
        raise ModelError(f"unknown task {task!r}")
    if max_depth < 0 or min_leaf < 1:
        raise ModelError("max_depth must be >= 0 and min_leaf >= 1")
    n, d = X.shape
    if mtry is not None and not 1 <= mtry <= d:
        raise ModelError(f"mtry={mtry} must be in 1..{d}")
    subsample = mtry is not None and mtry < d
    if subsample and rng is None:
        raise ModelError("feature subsampling needs an rng")

    tree = DecisionTree(task, max_depth, min_leaf)
    classify = task == CLASSIFY
    if classify:
        tree.classes = np.unique(y) if classes is None else np.asarray(classes, dtype=float)
        codes = np.searchsorted(tree.classes, y)
        if np.any(codes >= len(tree.classes)) or np.any(tree.classes[np.minimum(codes, len(tree.classes) - 1)] != y):
            raise ModelError("training labels outside the declared classes")
        n_cls = len(tree.classes)
        onehot = np.eye(n_cls, dtype=np.int32)[codes]
    else:
        # centring keeps the running sums small; split ranking is shift-invariant
        yc = y - y.mean()

    # dense per-feature ranks: equal values share a rank, so a threshold can
    # only fall between rows whose ranks differ
    rank = np.empty((d, n), dtype=np.int64)
    uniq = []
    for f in range(d):
        u, inv = np.unique(X[:, f], return_inverse=True)
        uniq.append(u)
        rank[f] = inv
    R = max((len(u) for u in uniq), default=0)
    uniq_mat = np.full((d, R), np.nan)
    for f, u in enumerate(uniq):
        uniq_mat[f, :len(u)] = u

    parts = {k: [] for k in ("feature", "threshold", "left", "right", "value", "n_samples")}
    first = 0  # id of the first node on the current level
    F = 1
    loc = np.zeros(n, dtype=int)  # row -> position on the current level, -1 once settled
    srt = np.argsort(rank, axis=1, kind="stable")  # (d, active rows)
    depth = 0
    while F:
        active = np.flatnonzero(loc >= 0)
        la = loc[active]
        size = np.bincount(la, minlength=F)
        if classify:
            counts = np.bincount(la * n_cls + codes[active], minlength=F * n_cls).reshape(F, n_cls).astype(float)
            pure = counts.max(axis=1) == size
            parts["value"].append(counts)
        else:
            sums = np.bincount(la, weights=yc[active], minlength=F)
            lo = np.full(F, np.inf)
            hi = np.full(F, -np.inf)
            np.minimum.at(lo, la, y[active])
            np.maximum.at(hi, la, y[active])
            pure = lo == hi
            parts["value"].append(np.bincount(la, weights=y[active], minlength=F) / size)
        parts["n_samples"].append(size)
        chosen_f = np.full(F, LEAF)
        chosen_thr = np.zeros(F)
        left = np.full(F, LEAF)
        right = np.full(F, LEAF)

        splittable = ~pure & (size >= 2 * min_leaf)
        if depth < max_depth and d > 0 and splittable.any():
            _choose_splits(X, rank, uniq_mat, srt, loc, size, splittable, min_leaf, subsample, mtry, rng,
                           classify, onehot if classify else None, counts if classify else None,
                           yc if not classify else None, sums if not classify else None,
                           chosen_f, chosen_thr)
        split = chosen_f != LEAF
        n_split = int(split.sum())
        child_rank = np.cumsum(split) - 1
        left[split] = first + F + 2 * child_rank[split]
        right[split] = left[split] + 1
        for k, v in (("feature", chosen_f), ("threshold", chosen_thr), ("left", left), ("right", right)):
            parts[k].append(v)
        if n_split == 0:
            break

        split_rows = active[split[la]]
        ls = loc[split_rows]
        go_left = X[split_rows, chosen_f[ls]] <= chosen_thr[ls]
        loc[:] = -1
        loc[split_rows] = 2 * child_rank[ls] + np.where(go_left, 0, 1)
        # carry the per-feature order to the children: a stable sort on the
        # child position keeps rows ascending within each child
        srt = srt[:, loc[srt[0]] >= 0]
        child = loc[srt]
        if 2 * n_split < 2 ** 16:
            child = child.astype(np.uint16)  # radix sort
        srt = np.take_along_axis(srt, np.argsort(child, axis=1, kind="stable"), axis=1)
        first += F
        F = 2 * n_split
        depth += 1

    tree.feature = np.concatenate(parts["feature"]).astype(np.int64)
    tree.threshold = np.concatenate(parts["threshold"]).astype(float)
    tree.left = np.concatenate(parts["left"]).astype(np.int64)
    tree.right = np.concatenate(parts["right"]).astype(np.int64)
    tree.value = np.concatenate(parts["value"]) if not classify else np.vstack(parts["value"])
    tree.n_samples = np.concatenate(parts["n_samples"]).astype(np.int64)
    return tree


def _choose_splits(X, rank, uniq_mat, srt, loc, size, splittable, min_leaf, subsample, mtry, rng,
                   classify, onehot, counts, yc, sums, chosen_f, chosen_thr):
    """Fill ``chosen_f``/``chosen_thr`` for every node on the level that has a valid split."""
    F = len(size)
    d = X.shape[1]
    sampled = np.zeros((F, d), dtype=bool)
    nodes = np.flatnonzero(splittable)
    if subsample:
        # mtry distinct features per node: the smallest of d uniform keys
        picks = np.argsort(rng.random((len(nodes), d)), axis=1)[:, :mtry]
        sampled[np.repeat(nodes, mtry), picks.ravel()] = True
    else:
        sampled[nodes] = True

    # rows of splittable nodes, grouped by node and ascending in each feature
    keep = splittable[loc[srt[0]]]
    srt_s = srt[:, keep]
    m = srt_s.shape[1]
    ls = loc[srt_s[0]]
    ks = rank[np.arange(d)[:, None], srt_s]
    seg_start = np.flatnonzero(np.r_[True, ls[1:] != ls[:-1]])
    start_of = np.repeat(seg_start, np.diff(np.r_[seg_start, m]))
    nl = np.arange(m) - start_of + 1
    nr = size[ls] - nl
    valid = np.zeros((d, m), dtype=bool)
    valid[:, :-1] = (ls[:-1] == ls[1:])[None, :] & (ks[:, :-1] < ks[:, 1:])
    valid &= ((nl >= min_leaf) & (nr >= min_leaf))[None, :]
    valid &= sampled[ls].T
    fi, pos = np.nonzero(valid)  # feature-major, ascending position
    if len(pos) == 0:
        return
    lp = ls[pos]
    nlp = nl[pos].astype(float)
    nrp = nr[pos].astype(float)
    sp = start_of[pos]
    if classify:
        # integer running counts with a leading zero row: exact and cheap
        cum = np.zeros((d, m + 1, onehot.shape[1]), dtype=np.int32)
        np.cumsum(onehot[srt_s], axis=1, dtype=np.int32, out=cum[:, 1:])
        left = (cum[fi, pos + 1] - cum[fi, sp]).astype(float)
        right = counts[lp] - left
        score = np.einsum("ij,ij->i", left, left) / nlp + np.einsum("ij,ij->i", right, right) / nrp
    else:
        cum = np.zeros((d, m + 1))
        np.cumsum(yc[srt_s], axis=1, out=cum[:, 1:])
        left = cum[fi, pos + 1] - cum[fi, sp]
        score = left * left / nlp + (sums[lp] - left) ** 2 / nrp
    best = np.full(F, -np.inf)
    np.maximum.at(best, lp, score)

    tol = 1e-12 * np.maximum(1.0, np.abs(best))
    ok = score >= best[lp] - tol[lp]
    # candidates are ordered by (feature, threshold): the first one per node wins ties
    u, first = np.unique(lp[ok], return_index=True)
    cf, cp = fi[ok][first], pos[ok][first]
    chosen_f[u] = cf
    chosen_thr[u] = _midpoints(uniq_mat[cf, ks[cf, cp]], uniq_mat[cf, ks[cf, cp + 1]])


def apply_tree(tree: DecisionTree, Q) -> np.ndarray:
    """Leaf index reached by each query row."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    feature, threshold, left, right = tree.feature, tree.threshold, tree.left, tree.right
    node = np.zeros(len(Q), dtype=int)
    rows = np.arange(len(Q))
    while True:
        f = feature[node]
        active = f != LEAF
        if not active.any():
            return node
        r = rows[active]
        n = node[active]
        go_left = Q[r, f[active]] <= threshold[n]
        node[active] = np.where(go_left, left[n], right[n])


def dt_predict(tree: DecisionTree, Q) -> np.ndarray:
    leaves = apply_tree(tree, Q)
    if tree.task == REGRESS:
        return tree.value[leaves]
    return tree.classes[np.argmax(tree.value[leaves], axis=1)]
