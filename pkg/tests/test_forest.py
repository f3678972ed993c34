import numpy as np
import pytest

from app.internal.classifiers.cart import fit_cart
from app.internal.classifiers.ensemble import EnsembleKind, EnsembleRecord
from app.internal.classifiers.forest import fit_random_forest
from app.internal.classifiers.params import (
    ClassWeights,
    Hyperparams,
    TrainingError,
    balanced_weights,
    class_counts,
)
from app.internal.models import FeatureMatrix, binary_targets


@pytest.mark.parametrize(
    ("n_neg", "n_pos", "w_neg", "w_pos"),
    [(253, 1050, 2.5751, 0.6205), (50, 50, 1.0, 1.0), (90, 10, 0.5556, 5.0)],
)
def test_balanced_weights(n_neg: int, n_pos: int, w_neg: float, w_pos: float):
    weights = balanced_weights(n_neg, n_pos)
    assert weights.w_neg == pytest.approx(w_neg, abs=1e-4)
    assert weights.w_pos == pytest.approx(w_pos, abs=1e-4)


def test_balanced_weights_need_both_classes():
    with pytest.raises(TrainingError):
        balanced_weights(0, 10)


def test_memorizes_its_training_set():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(40, 3))
    y = rng.integers(0, 2, size=40)
    forest = fit_random_forest(X, y, Hyperparams(n_trees=5, max_depth=None, bootstrap=False), ClassWeights(w_neg=1, w_pos=1))
    assert np.array_equal(forest.predict_proba(X) >= 0.5, y == 1)


def test_single_unbagged_tree_equals_cart(noisy: FeatureMatrix):
    y = binary_targets(noisy)
    weights = balanced_weights(*class_counts(y))
    params = Hyperparams(n_trees=1, bootstrap=False, features_per_split=noisy.n_features, max_depth=4)
    forest = fit_random_forest(noisy.values, y, params, weights)
    sample_weights = np.where(y == 1, weights.w_pos, weights.w_neg)
    tree = fit_cart(noisy.values, y, sample_weights, params)
    assert np.array_equal(forest.trees[0].feature, tree.feature)
    assert np.allclose(forest.predict_proba(noisy.values), tree.predict(noisy.values))


def test_forest_separates_blobs(blobs: FeatureMatrix):
    y = binary_targets(blobs)
    forest = fit_random_forest(blobs.values, y, Hyperparams(n_trees=20), balanced_weights(*class_counts(y)))
    assert forest.kind == EnsembleKind.bagged
    assert np.array_equal(forest.predict_proba(blobs.values) >= 0.5, y == 1)


def test_forest_does_not_depend_on_thread_count(noisy: FeatureMatrix):
    y = binary_targets(noisy)
    params = Hyperparams(n_trees=12, max_depth=4, seed=9)
    weights = ClassWeights(w_neg=1.5, w_pos=0.75)
    serial = fit_random_forest(noisy.values, y, params, weights, n_jobs=1)
    threaded = fit_random_forest(noisy.values, y, params, weights, n_jobs=4)
    assert np.array_equal(serial.predict_proba(noisy.values), threaded.predict_proba(noisy.values))


def test_covers_sum_to_children(noisy: FeatureMatrix):
    y = binary_targets(noisy)
    forest = fit_random_forest(noisy.values, y, Hyperparams(n_trees=5), balanced_weights(*class_counts(y)))
    for tree in forest.trees:
        internal = np.flatnonzero(tree.left != -1)
        assert np.allclose(tree.cover[internal], tree.cover[tree.left[internal]] + tree.cover[tree.right[internal]])
        assert (tree.cover > 0).all()


def test_ensemble_record_round_trip(noisy: FeatureMatrix, tmp_path):
    y = binary_targets(noisy)
    forest = fit_random_forest(
        noisy.values, y, Hyperparams(n_trees=3), balanced_weights(*class_counts(y)), list(noisy.feature_names)
    )
    forest.to_record().save(tmp_path / "forest.json")
    restored = EnsembleRecord.load(tmp_path / "forest.json").to_ensemble()
    assert restored.feature_names == list(noisy.feature_names)
    assert np.array_equal(restored.predict_proba(noisy.values), forest.predict_proba(noisy.values))


def test_one_class_is_rejected():
    with pytest.raises(TrainingError):
        fit_random_forest(np.zeros((4, 1)), np.ones(4), Hyperparams(), ClassWeights(w_neg=1, w_pos=1))


def test_first_trees_are_the_smaller_forest(noisy: FeatureMatrix):
    y = binary_targets(noisy)
    weights = balanced_weights(*class_counts(y))
    params = Hyperparams(n_trees=9, max_depth=None, seed=4)
    large = fit_random_forest(noisy.values, y, params, weights)
    small = fit_random_forest(noisy.values, y, params.model_copy(update={"n_trees": 4}), weights)
    assert np.array_equal(large.truncated(4).predict_proba(noisy.values), small.predict_proba(noisy.values))


def test_shallower_forest_is_the_deep_one_cut(noisy: FeatureMatrix):
    y = binary_targets(noisy)
    weights = balanced_weights(*class_counts(y))
    deep = fit_random_forest(noisy.values, y, Hyperparams(n_trees=6, max_depth=None, seed=2), weights)
    shallow = fit_random_forest(noisy.values, y, Hyperparams(n_trees=6, max_depth=2, seed=2), weights)
    cut = deep.truncated(6, max_depth=2)
    assert all(tree.depth() <= 2 for tree in cut.trees)
    assert np.array_equal(cut.predict_proba(noisy.values), shallow.predict_proba(noisy.values))
