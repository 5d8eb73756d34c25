import numpy as np
import pytest

from msd.core.rng import Rng
from msd.learners.gbt import GbtParams, gbt_fit, gbt_importances


def _separable(n=500, d=4, seed=0):
    X = Rng(seed).normal_array((n, d))
    return X, (X[:, 0] > 0).astype(int)


def test_separable_threshold_learned():
    X, y = _separable()
    model = gbt_fit(X, y)
    assert np.mean(model.predict(X) == y) >= 0.99
    assert gbt_importances(model)[0] >= 0.95


def test_importances_sum_to_one():
    X, y = _separable(seed=1)
    imp = gbt_importances(gbt_fit(X, y, GbtParams(n_trees=20)))
    assert abs(imp.sum() - 1.0) <= 1e-9 and (imp >= 0).all()


def test_noise_features_stay_near_majority_rate():
    rng = Rng(2)
    X = rng.normal_array((800, 5))
    y = np.array([rng.integers(3) for _ in range(800)])
    model = gbt_fit(X[:600], y[:600])
    held = np.mean(model.predict(X[600:]) == y[600:])
    majority = np.bincount(y[600:]).max() / 200
    assert abs(held - majority) <= 0.1


def test_duplicate_column_leaves_predictions_unchanged():
    X, y = _separable(seed=3)
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(int)
    base = gbt_fit(X, y, GbtParams(n_trees=30))
    dup = gbt_fit(np.concatenate([X, X[:, :1]], axis=1), y, GbtParams(n_trees=30))
    Xt = Rng(4).normal_array((200, 4))
    assert np.array_equal(base.predict(Xt), dup.predict(np.concatenate([Xt, Xt[:, :1]], axis=1)))


def test_single_class_rejected():
    with pytest.raises(ValueError):
        gbt_fit(np.ones((5, 2)), np.zeros(5))


def test_constant_features_give_uniform_importances():
    model = gbt_fit(np.ones((10, 3)), np.array([0, 1] * 5), GbtParams(n_trees=5))
    assert np.allclose(gbt_importances(model), 1 / 3)


def test_training_loss_monotone_and_deterministic():
    X = Rng(5).normal_array((300, 3))
    y = (np.sin(3 * X[:, 0]) + X[:, 2] > 0).astype(int) + (X[:, 1] > 1).astype(int)
    a = gbt_fit(X, y, GbtParams(n_trees=40))
    b = gbt_fit(X, y, GbtParams(n_trees=40))
    assert all(l2 <= l1 + 1e-12 for l1, l2 in zip(a.train_loss, a.train_loss[1:]))
    assert np.array_equal(a.decision_function(X), b.decision_function(X))


def test_string_labels_and_multiclass():
    X = Rng(6).normal_array((300, 2))
    y = np.where(X[:, 0] > 0.5, "hi", np.where(X[:, 0] < -0.5, "lo", "mid"))
    model = gbt_fit(X, y)
    assert np.mean(model.predict(X) == y) >= 0.99
