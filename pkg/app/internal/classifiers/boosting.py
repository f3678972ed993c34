import math
from dataclasses import dataclass
from typing import final

import numpy as np
from scipy.special import expit

from app.internal.classifiers.ensemble import EnsembleKind, TreeEnsemble
from app.internal.classifiers.params import Hyperparams, TrainingError
from app.internal.classifiers.tree import BinnedFeatures, Tree, grow_tree
from app.internal.errors import ScopeError
from app.util.log import logger


class NumericError(ScopeError):
    pass


@final
@dataclass(frozen=True)
class SecondOrderCriterion:
    """
    Newton steps on the loss over the statistics (gradient, hessian). A split's gain is
    1/2 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)]; leaf size counts raw samples.
    """

    learning_rate: float
    l2_lambda: float
    min_samples_leaf: float
    min_gain: float = 0.0

    def node_values(self, sums: np.ndarray) -> np.ndarray:
        g, h = sums
        return -self.learning_rate * g / (h + self.l2_lambda)

    def is_terminal(self, sums: np.ndarray, counts: np.ndarray) -> np.ndarray:
        return counts < 2 * self.min_samples_leaf

    def split_gains(
        self, left: np.ndarray, right: np.ndarray, left_counts: np.ndarray, right_counts: np.ndarray
    ) -> np.ndarray:
        (left_g, left_h), (right_g, right_h) = left, right
        lam = self.l2_lambda
        gains = 0.5 * (
            left_g**2 / (left_h + lam)
            + right_g**2 / (right_h + lam)
            - (left_g + right_g) ** 2 / (left_h + right_h + lam)
        )
        allowed = (left_counts >= self.min_samples_leaf) & (right_counts >= self.min_samples_leaf)
        return np.where(allowed, gains, -np.inf)


def weighted_logistic_loss(margin: np.ndarray, y: np.ndarray, spw: float) -> float:
    """Sum over samples of the logistic loss, positives scaled by `spw`."""
    losses = np.logaddexp(0.0, margin) - y * margin
    return float(np.sum(np.where(y == 1, spw, 1.0) * losses))


def fit_gbm(
    X: np.ndarray,
    y: np.ndarray,
    params: Hyperparams,
    spw: float,
    feature_names: list[str] | None = None,
) -> TreeEnsemble:
    """
    Second-order boosting of the logistic loss. Gradients and hessians of positive
    samples are multiplied by `spw` (scale_pos_weight).
    """
    if np.unique(y).size != 2:
        raise TrainingError("Gradient boosting needs both classes in the training set")
    if spw <= 0:
        raise TrainingError(f"scale_pos_weight must be positive, got {spw}")
    y = y.astype(np.float64)
    positive = y == 1
    instance_weight = np.where(positive, spw, 1.0)
    weighted_rate = instance_weight[positive].sum() / instance_weight.sum()
    base_score = math.log(weighted_rate / (1.0 - weighted_rate))

    rng = np.random.default_rng(params.seed)
    binned = BinnedFeatures.from_matrix(X)
    rows = np.arange(y.size)
    criterion = SecondOrderCriterion(params.learning_rate, params.l2_lambda, params.min_samples_leaf)
    margin = np.full(y.size, base_score)
    trees: list[Tree] = []
    for stage in range(params.n_trees):
        p = expit(margin)
        g = (p - y) * instance_weight
        h = p * (1.0 - p) * instance_weight
        tree = grow_tree(
            binned, rows, np.vstack([g, h]), instance_weight, criterion, params.max_depth, params.features_per_split, rng
        )
        margin = margin + tree.predict(X)
        if not np.isfinite(margin).all():
            raise NumericError(f"Non-finite margin after boosting stage {stage}")
        trees.append(tree)

    logger.debug(
        "Fitted gradient boosting",
        rounds=len(trees),
        scale_pos_weight=spw,
        base_score=base_score,
        training_loss=weighted_logistic_loss(margin, y, spw),
    )
    return TreeEnsemble(
        trees=trees,
        kind=EnsembleKind.boosted,
        base_score=base_score,
        feature_names=feature_names or [f"x{i}" for i in range(X.shape[1])],
    )
