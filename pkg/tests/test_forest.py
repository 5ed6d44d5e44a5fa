import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from evdemand.errors import ModelError
from evdemand.models.forest import default_mtry, rf_fit, rf_predict
from evdemand.models.knn import CLASSIFY, REGRESS
from evdemand.models.persist import model_to_dict
from evdemand.models.tree import dt_fit, dt_predict
from evdemand.synth import two_clusters


def test_default_mtry():
    assert [default_mtry(d, CLASSIFY) for d in (1, 4, 5, 9, 10)] == [1, 2, 3, 3, 4]
    assert [default_mtry(d, REGRESS) for d in (1, 3, 4, 6, 7)] == [1, 1, 2, 2, 3]


def test_single_tree_without_bagging_is_the_tree():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(120, 5))
    y = rng.integers(1, 4, 120).astype(float)
    f = rf_fit(X, y, n_trees=1, max_depth=5, mtry=5, bootstrap=False)
    t = dt_fit(X, y, max_depth=5)
    Q = rng.normal(size=(200, 5))
    assert np.array_equal(rf_predict(f, Q), dt_predict(t, Q))


def test_thread_count_does_not_change_the_forest():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(150, 4))
    y = rng.integers(1, 5, 150).astype(float)
    one = rf_fit(X, y, n_trees=12, max_depth=6, base_seed=3, n_jobs=1)
    many = rf_fit(X, y, n_trees=12, max_depth=6, base_seed=3, n_jobs=4)
    assert model_to_dict(one) == model_to_dict(many)


def test_tree_i_depends_only_on_base_seed_plus_i():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(60, 3))
    y = rng.normal(size=60)
    f = rf_fit(X, y, n_trees=5, max_depth=4, base_seed=10, task=REGRESS)
    alone = rf_fit(X, y, n_trees=1, max_depth=4, base_seed=13, task=REGRESS)
    assert model_to_dict(alone)["trees"][0] == model_to_dict(f)["trees"][3]


def test_separated_clusters_are_learned():
    X, y, centres = two_clusters(400, seed=4)
    train, test = np.arange(300), np.arange(300, 400)
    f = rf_fit(X[train], y[train], n_trees=50, max_depth=6)
    nearest = 1 + np.argmin(((X[test, None, :] - centres[None]) ** 2).sum(-1), axis=1)
    acc = (rf_predict(f, X[test]) == y[test]).mean()
    assert acc >= 0.95
    assert (rf_predict(f, X[test]) == nearest).mean() >= 0.95


@settings(max_examples=25)
@given(st.integers(3, 40).flatmap(lambda n: st.tuples(
    hnp.arrays(float, (n, 3), elements=st.floats(-5, 5)),
    hnp.arrays(float, n, elements=st.floats(-100, 100)))), st.integers(0, 50))
def test_regression_stays_in_training_range(data, seed):
    X, y = data
    f = rf_fit(X, y, n_trees=8, max_depth=5, base_seed=seed, task=REGRESS)
    Q = np.random.default_rng(seed).uniform(-8, 8, size=(20, 3))
    p = rf_predict(f, Q)
    assert np.all(p >= y.min() - 1e-9) and np.all(p <= y.max() + 1e-9)


def test_rejects_bad_sizes():
    with pytest.raises(ModelError):
        rf_fit([[1.0]], [1.0], n_trees=0)
    with pytest.raises(ModelError):
        rf_fit(np.empty((0, 2)), [])
    with pytest.raises(ModelError):
        rf_fit([[1.0], [2.0]], [1.0, 2.0], mtry=3)
