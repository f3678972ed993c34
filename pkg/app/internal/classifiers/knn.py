from dataclasses import dataclass
from typing import final

import numpy as np

from app.internal.classifiers.params import TrainingError
from app.internal.models import FeatureMatrix, binary_targets


def nearest_indices(train: np.ndarray, x: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest training rows (Euclidean), ties broken by lower index."""
    distances = np.sum((train - x) ** 2, axis=1)
    return np.argsort(distances, kind="stable")[:k]


@final
@dataclass(frozen=True)
class KnnModel:
    """Unweighted k-nearest neighbours. Fitting only stores the training rows."""

    X: np.ndarray
    y: np.ndarray
    k: int

    def __post_init__(self):
        if self.X.shape[0] == 0:
            raise TrainingError("KNN needs a non-empty training set")
        if self.k > self.X.shape[0]:
            raise TrainingError(f"k={self.k} exceeds the {self.X.shape[0]} training samples")

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.array([float(self.y[nearest_indices(self.X, row, self.k)].mean()) for row in X])


def knn_predict_proba(train: FeatureMatrix, x: np.ndarray, k: int) -> float:
    model = KnnModel(X=train.values, y=binary_targets(train).astype(np.float64), k=k)
    return float(model.predict_proba(x.reshape(1, -1))[0])
