import numpy as np
import pytest

from app.internal.classifiers.families import Family, fit_family
from app.internal.classifiers.knn import KnnModel, knn_predict_proba, nearest_indices
from app.internal.classifiers.params import Hyperparams, TrainingError
from tests.helpers import make_matrix


def five_points():
    return make_matrix([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0], [6.0, 5.0]], [1, 1, 0, 0, 0])


def test_three_neighbours_vote():
    assert knn_predict_proba(five_points(), np.array([0.2, 0.2]), k=3) == pytest.approx(2 / 3)


def test_one_neighbour_copies_its_label():
    train = five_points()
    assert knn_predict_proba(train, np.array([5.9, 5.1]), k=1) == 0.0
    assert knn_predict_proba(train, np.array([0.9, 0.1]), k=1) == 1.0


def test_all_neighbours_give_the_class_rate():
    train = five_points()
    assert knn_predict_proba(train, np.array([100.0, -3.0]), k=5) == pytest.approx(0.4)


def test_ties_go_to_the_lower_index():
    train = np.array([[1.0], [-1.0], [1.0]])
    assert list(nearest_indices(train, np.array([0.0]), 2)) == [0, 1]


def test_k_above_training_size_is_rejected():
    with pytest.raises(TrainingError):
        KnnModel(X=np.zeros((2, 1)), y=np.array([0.0, 1.0]), k=3)


def test_family_fit_clamps_k():
    model = fit_family(Family.knn, np.zeros((3, 1)), np.array([1, 0, 1]), Hyperparams(k_neighbors=11))
    assert isinstance(model, KnnModel)
    assert model.k == 3
