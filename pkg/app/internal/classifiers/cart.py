import math
from dataclasses import dataclass
from typing import final

import numpy as np

from app.internal.classifiers.params import Hyperparams, TrainingError
from app.internal.classifiers.tree import LEAF, BinnedFeatures, Tree, find_best_splits, grow_tree


@final
@dataclass(frozen=True)
class GiniCriterion:
    """
    Weighted Gini impurity over the statistics (weight, weight * y).

    A split's gain is minus the weighted child impurity W_L * gini(L) + W_R * gini(R),
    so any allowed split is taken, even one that leaves the impurity unchanged.
    """

    min_samples_leaf: float
    min_gain: float = -np.inf

    def node_values(self, sums: np.ndarray) -> np.ndarray:
        return sums[1] / sums[0]

    def is_terminal(self, sums: np.ndarray, counts: np.ndarray) -> np.ndarray:
        weight, positive = sums
        return (positive == 0.0) | (positive == weight) | (weight < 2 * self.min_samples_leaf)

    def split_gains(
        self, left: np.ndarray, right: np.ndarray, left_counts: np.ndarray, right_counts: np.ndarray
    ) -> np.ndarray:
        (left_w, left_p), (right_w, right_p) = left, right
        # W * 2p(1-p) == 2P(1 - P/W)
        impurity = 2.0 * left_p * (1.0 - left_p / left_w) + 2.0 * right_p * (1.0 - right_p / right_w)
        allowed = (left_w >= self.min_samples_leaf) & (right_w >= self.min_samples_leaf)
        return np.where(allowed, -impurity, -np.inf)


def best_gini_split(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    features: np.ndarray,
    min_samples_leaf: float,
) -> tuple[int, float] | None:
    """Lowest-impurity (feature, threshold); ties go to the lowest feature index, then threshold."""
    rows = np.arange(X.shape[0])
    split = find_best_splits(
        BinnedFeatures.from_matrix(X),
        rows,
        np.zeros(rows.size, dtype=np.intp),
        np.sort(np.asarray(features)).reshape(1, -1),
        np.vstack([w, w * y]),
        GiniCriterion(min_samples_leaf),
    )
    if split.feature[0] == LEAF:
        return None
    return int(split.feature[0]), float(split.threshold[0])


def grow_classification_tree(
    binned: BinnedFeatures,
    rows: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    params: Hyperparams,
    rng: np.random.Generator | None,
) -> Tree:
    """CART over `rows` of `binned`; `w` holds the sample weight of every row."""
    return grow_tree(
        binned,
        rows,
        np.vstack([w, w * y]),
        w,
        GiniCriterion(params.min_samples_leaf),
        params.max_depth,
        params.features_per_split,
        rng,
    )


def fit_cart(
    X: np.ndarray,
    y: np.ndarray,
    sample_weights: np.ndarray | None = None,
    params: Hyperparams | None = None,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Weighted Gini CART. Leaf values are the weighted positive fraction."""
    params = params or Hyperparams(max_depth=None)
    if X.shape[0] == 0:
        raise TrainingError("Cannot fit a tree on an empty training set")
    w = np.ones(X.shape[0]) if sample_weights is None else np.asarray(sample_weights, dtype=np.float64)
    if (w <= 0).any():
        raise TrainingError("Sample weights must be positive")
    binned = BinnedFeatures.from_matrix(X)
    return grow_classification_tree(binned, np.arange(X.shape[0]), y.astype(np.float64), w, params, rng)


def default_features_per_split(n_features: int) -> int:
    return max(1, math.ceil(math.sqrt(n_features)))
