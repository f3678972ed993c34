import math

import numpy as np
import pytest
from scipy.special import expit

from app.internal.classifiers.boosting import SecondOrderCriterion, fit_gbm, weighted_logistic_loss
from app.internal.classifiers.ensemble import EnsembleKind, TreeEnsemble
from app.internal.classifiers.params import Hyperparams, TrainingError, scale_pos_weight


def imbalanced(seed: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """10 positives among 100 rows, overlapping in two features."""
    rng = np.random.default_rng(seed)
    y = np.array([1] * 10 + [0] * 90)
    X = rng.normal(size=(100, 2))
    X[:, 0] += 0.8 * y
    return X, y


@pytest.mark.parametrize(("n_neg", "n_pos", "expected"), [(253, 1050, 0.24095), (40, 40, 1.0), (900, 100, 9.0)])
def test_scale_pos_weight(n_neg: int, n_pos: int, expected: float):
    assert scale_pos_weight(n_neg, n_pos) == pytest.approx(expected, abs=1e-5)


def test_scale_pos_weight_needs_positives():
    with pytest.raises(TrainingError):
        scale_pos_weight(5, 0)


def test_base_score_is_weighted_log_odds():
    X, y = imbalanced()
    model = fit_gbm(X, y, Hyperparams(n_trees=1), spw=1.0)
    assert model.base_score == pytest.approx(math.log(10 / 90))
    balanced = fit_gbm(X, y, Hyperparams(n_trees=1), spw=9.0)
    assert balanced.base_score == pytest.approx(0.0)


def test_empty_ensemble_predicts_the_base_score():
    model = TreeEnsemble(trees=[], kind=EnsembleKind.boosted, base_score=0.7, feature_names=["a"])
    assert np.allclose(model.predict_proba(np.zeros((3, 1))), expit(0.7))


def test_leaf_signs_follow_the_classes():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    model = fit_gbm(X, y, Hyperparams(n_trees=1, max_depth=1), spw=1.0)
    tree = model.trees[0]
    assert tree.threshold[0] == 1.5
    assert tree.value[tree.left[0]] < 0 < tree.value[tree.right[0]]


def test_training_loss_does_not_increase():
    X, y = imbalanced()
    spw = 3.0
    model = fit_gbm(X, y, Hyperparams(n_trees=30, max_depth=3, learning_rate=0.1), spw=spw)
    losses = [weighted_logistic_loss(m, y, spw) for m in model.staged_margins(X)]
    assert all(later <= earlier + 1e-9 for earlier, later in zip(losses, losses[1:]))
    assert np.allclose(model.staged_margins(X)[-1], model.predict_raw(X))


def held_out_pair(seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Nine negatives per positive, the positives shifted by 1 in feature 0."""
    rng = np.random.default_rng(seed)
    y = np.array([1] * 50 + [0] * 450)
    X = rng.normal(size=(500, 2))
    X[:, 0] += 1.0 * y
    return X, y


def test_positive_weight_raises_held_out_recall():
    X, y = held_out_pair(4)
    X_test, y_test = held_out_pair(5)
    params = Hyperparams(n_trees=20, max_depth=2, learning_rate=0.1)
    recalls = []
    for spw in (1.0, 3.0, 9.0):
        predicted = fit_gbm(X, y, params, spw=spw).predict_proba(X_test) >= 0.5
        recalls.append(np.count_nonzero(predicted & (y_test == 1)) / 50)
    assert recalls[0] <= recalls[1] <= recalls[2]
    assert recalls[2] - recalls[0] >= 0.3


def test_gain_is_not_positive_without_signal():
    # four rows with identical gradients, split after the first, second and third
    criterion = SecondOrderCriterion(learning_rate=0.1, l2_lambda=1.0, min_samples_leaf=1)
    left = np.array([[0.5, 1.0, 1.5], [0.25, 0.5, 0.75]])
    right = np.array([[2.0], [1.0]]) - left
    counts = np.array([1.0, 2.0, 3.0])
    gains = criterion.split_gains(left, right, counts, 4.0 - counts)
    assert np.all(gains <= 1e-12)


def test_min_samples_leaf_counts_rows():
    criterion = SecondOrderCriterion(learning_rate=0.1, l2_lambda=1.0, min_samples_leaf=2)
    left = np.array([[-1.0, -2.0, -2.0], [0.5, 1.0, 1.0]])
    right = np.array([[3.0, 2.0, 2.0], [1.0, 0.5, 0.5]])
    gains = criterion.split_gains(left, right, np.array([1.0, 2.0, 3.0]), np.array([3.0, 2.0, 1.0]))
    assert gains[0] == -np.inf
    assert gains[2] == -np.inf
    assert np.isfinite(gains[1])


def test_first_trees_are_the_shorter_model():
    X, y = imbalanced()
    params = Hyperparams(n_trees=12, max_depth=3, features_per_split=1, seed=3)
    long = fit_gbm(X, y, params, spw=3.0)
    short = fit_gbm(X, y, params.model_copy(update={"n_trees": 5}), spw=3.0)
    assert np.array_equal(long.truncated(5).predict_raw(X), short.predict_raw(X))


def test_invalid_inputs():
    X, y = imbalanced()
    with pytest.raises(TrainingError):
        fit_gbm(X, y, Hyperparams(n_trees=1), spw=0.0)
    with pytest.raises(TrainingError):
        fit_gbm(X, np.ones_like(y), Hyperparams(n_trees=1), spw=1.0)
