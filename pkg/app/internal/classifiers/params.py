import numpy as np
from pydantic import BaseModel, Field

from app.internal.errors import ScopeError


class TrainingError(ScopeError):
    pass


class Hyperparams(BaseModel, frozen=True):
    """Hyperparameters shared by every classifier family. Each family reads the fields it needs."""

    n_trees: int = Field(default=100, gt=0)
    max_depth: int | None = Field(default=6, gt=0)
    """`None` grows trees until purity or the leaf-size limit."""
    min_samples_leaf: float = Field(default=1, gt=0)
    features_per_split: int | None = Field(default=None, gt=0)
    """`None` means every feature for CART and boosting, and ceil(sqrt(d)) for random forests."""
    bootstrap: bool = True
    learning_rate: float = Field(default=0.1, gt=0)
    l2_lambda: float = Field(default=1.0, gt=0)
    k_neighbors: int = Field(default=5, gt=0)
    lr_l2: float = Field(default=0.1, gt=0)
    lr_max_iter: int = Field(default=1000, gt=0)
    lr_step: float | None = Field(default=None, gt=0)
    """Gradient-descent step. `None` picks 1/L from the loss's Lipschitz bound."""
    seed: int = 42


class ClassWeights(BaseModel, frozen=True):
    w_neg: float = Field(gt=0)
    w_pos: float = Field(gt=0)


def balanced_weights(n_neg: int, n_pos: int) -> ClassWeights:
    """Weights inversely proportional to class frequency: n / (2 * n_c)."""
    if n_neg <= 0 or n_pos <= 0:
        raise TrainingError(
            f"Balanced weights need both classes present (negatives={n_neg}, positives={n_pos})"
        )
    total = n_neg + n_pos
    return ClassWeights(w_neg=total / (2 * n_neg), w_pos=total / (2 * n_pos))


def scale_pos_weight(n_neg: int, n_pos: int) -> float:
    if n_pos <= 0:
        raise TrainingError("scale_pos_weight needs at least one positive sample")
    return n_neg / n_pos


def class_counts(y: np.ndarray) -> tuple[int, int]:
    """(negatives, positives) in a 0/1 label vector."""
    n_pos = int(np.count_nonzero(y == 1))
    return int(y.size) - n_pos, n_pos
