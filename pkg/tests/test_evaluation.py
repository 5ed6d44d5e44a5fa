import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from evdemand.evaluation import (accuracy, comparison_report, confusion_matrix, expand_grid, rmse, sweep,
                                 write_comparison_csv, write_sweeps_csv)
from evdemand.features import FeatureRow, TargetRow, train_test_split
from helpers import random_rows

GRIDS = {"knn": {"k": [1, 3]}, "dt": {"max_depth": [2, 4]}, "rf": {"max_depth": [3]}}
FIXED = {"rf": {"n_trees": 5}}


def test_accuracy_examples():
    assert accuracy([1, 2, 3], [1, 2, 3]) == 100.0
    assert accuracy([1, 2, 3, 4], [1, 2, 3, 5]) == 75.0
    with pytest.raises(ValueError):
        accuracy([1], [1, 2])
    with pytest.raises(ValueError):
        accuracy([], [])


def test_rmse_examples():
    assert rmse([1.5, 2.0], [1.5, 2.0]) == 0.0
    assert rmse([0, 0], [1, -1]) == 1.0
    assert rmse([0], [3]) == 3.0
    with pytest.raises(ValueError):
        rmse([0, 1], [1])


vectors = st.integers(1, 30).flatmap(lambda n: st.tuples(
    hnp.arrays(float, n, elements=st.integers(1, 4).map(float)),
    hnp.arrays(float, n, elements=st.integers(1, 4).map(float))))


@given(vectors)
def test_metric_ranges(v):
    a, b = v
    assert 0.0 <= accuracy(a, b) <= 100.0
    assert rmse(a, b) >= 0.0
    assert (rmse(a, b) == 0.0) == bool(np.array_equal(a, b))
    assert rmse(a, a) == 0.0 and accuracy(a, a) == 100.0


def test_confusion_rows_are_truth():
    m = confusion_matrix([1, 2, 2], [1, 1, 2], [1, 2])
    assert m == [[1, 1], [0, 1]]


def test_expand_grid_order():
    assert expand_grid({"b": [1, 2], "a": [0]}) == [{"a": 0, "b": 1}, {"a": 0, "b": 2}]
    with pytest.raises(ValueError):
        expand_grid({})


def test_singleton_grid():
    split = train_test_split(random_rows(80, seed=1), seed=0)
    sw = sweep("knn", "label", {"k": [1]}, split, n_zones=4)
    assert sw.chosen == {"k": 1}
    assert sw.chosen_score == sw.scores[0]
    assert len(sw.scores) == 1


def _separable_rows(n=120, seed=0):
    # the zone is decided by one threshold on the start hour
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n):
        t0 = float(rng.uniform(0, 24))
        label = 1 if t0 < 12 else 2
        rows.append((FeatureRow(int(rng.integers(1, 4)), t0, float(rng.uniform(20, 90)), 42.25, -83.75),
                     TargetRow(label, t0 + 0.3, 10.0)))
    return rows


def test_equal_scores_pick_the_shallowest_tree():
    split = train_test_split(_separable_rows(), seed=2)
    sw = sweep("dt", "label", {"max_depth": [3, 1, 2, 5]}, split, n_zones=2)
    assert all(s == 100.0 for s in sw.scores)
    assert sw.chosen == {"max_depth": 1}


def test_score_table_has_one_row_per_setting():
    split = train_test_split(random_rows(60, seed=3), seed=1)
    sw = sweep("knn", "t_end", {"k": [1, 2, 3, 5, 8]}, split, n_zones=4)
    assert len(sw.scores) == len(sw.settings) == 5
    out = io.StringIO()
    write_sweeps_csv({"t_end": {"knn": sw}}, out)
    assert len(out.getvalue().splitlines()) == 1 + 5


@given(st.integers(0, 10_000), st.sampled_from(["label", "t_end", "soc_req"]))
def test_chosen_score_is_the_table_optimum(seed, target):
    split = train_test_split(random_rows(50, seed=seed), seed=seed)
    sw = sweep("dt", target, {"max_depth": [0, 1, 2, 3, 6]}, split, n_zones=4)
    finite = [s for s in sw.scores if not math.isnan(s)]
    assert sw.chosen_score == (max(finite) if target == "label" else min(finite))
    assert sw.scores[sw.settings.index(sw.chosen)] == sw.chosen_score


def test_oversized_k_is_skipped():
    split = train_test_split(random_rows(20, seed=4), seed=0)
    sw = sweep("knn", "label", {"k": [1, 500]}, split, n_zones=4)
    assert math.isnan(sw.scores[1]) and sw.chosen == {"k": 1}


def test_validation_split_scores_on_validation_rows():
    rows = random_rows(100, seed=5)
    split = train_test_split(rows, seed=0, validation_frac=0.2)
    assert len(split.val_idx) == 20 and split.eval_idx == split.val_idx


def test_comparison_has_nine_cells_and_is_deterministic():
    split = train_test_split(random_rows(120, seed=6), seed=3)
    a = comparison_report(split, GRIDS, n_zones=4, fixed=FIXED)
    b = comparison_report(split, GRIDS, n_zones=4, fixed=FIXED, n_jobs=3)
    assert sorted(a.scores) == ["label", "soc_req", "t_end"]
    assert all(sorted(row) == ["dt", "knn", "rf"] for row in a.scores.values())
    assert a.as_dict() == b.as_dict()
    out_a, out_b = io.StringIO(), io.StringIO()
    write_comparison_csv(a, out_a)
    write_comparison_csv(b, out_b)
    assert out_a.getvalue() == out_b.getvalue()
    assert len(out_a.getvalue().splitlines()) == 4
    assert a.confusion["rf"]["labels"] == [1, 2, 3, 4, 5]
    assert sum(map(sum, a.confusion["rf"]["matrix"])) == len(split.test_idx)


def test_noiseless_end_time_is_learned_by_a_tree():
    # start times on a quarter-hour lattice: one leaf per start value recovers t_end exactly
    rng = np.random.default_rng(7)
    rows = []
    for i in range(800):
        t0 = (i % 96) / 4
        rows.append((FeatureRow(int(rng.integers(1, 6)), t0, float(rng.uniform(20, 90)),
                                float(rng.uniform(42.2, 42.3)), -83.75),
                     TargetRow(1, t0 + 0.35, 5.0)))
    split = train_test_split(rows, seed=1)
    cmp = comparison_report(split, {"knn": {"k": [1]}, "dt": {"max_depth": [4, 8, 12]},
                                    "rf": {"max_depth": [4]}}, n_zones=1, fixed=FIXED,
                            targets=("t_end",))
    assert cmp.scores["t_end"]["dt"] <= 0.02
