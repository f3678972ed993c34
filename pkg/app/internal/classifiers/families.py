import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Protocol, final

import numpy as np

from app.internal.classifiers.boosting import fit_gbm
from app.internal.classifiers.ensemble import TreeEnsemble
from app.internal.classifiers.forest import fit_random_forest
from app.internal.classifiers.knn import KnnModel
from app.internal.classifiers.logreg import fit_logreg
from app.internal.classifiers.params import (
    Hyperparams,
    TrainingError,
    balanced_weights,
    class_counts,
    scale_pos_weight,
)
from app.internal.dataset.normalize import NormalizationParams, apply_minmax, fit_minmax
from app.internal.models import FeatureMatrix, binary_targets


class Family(str, Enum):
    lr = "lr"
    knn = "knn"
    rf = "rf"
    gbm = "gbm"

    @property
    def nested_params(self) -> tuple[str, ...]:
        """
        Hyperparameters whose smaller values give a model contained in a larger fit: the
        first n trees of an ensemble and, for forests, the trees cut at a smaller depth.
        """
        match self:
            case Family.rf:
                return ("n_trees", "max_depth")
            case Family.gbm:
                return ("n_trees",)
            case _:
                return ()


class Classifier(Protocol):
    def predict_proba(self, X: np.ndarray) -> np.ndarray: ...


def fit_family(
    family: Family,
    X: np.ndarray,
    y: np.ndarray,
    params: Hyperparams,
    feature_names: list[str] | None = None,
    n_jobs: int = 1,
) -> Classifier:
    """
    Fit one classifier family with its native imbalance handling: balanced class
    weights for LR and RF, scale_pos_weight for GBM, none for KNN.
    """
    n_neg, n_pos = class_counts(y)
    match family:
        case Family.lr:
            return fit_logreg(X, y, balanced_weights(n_neg, n_pos), params)
        case Family.knn:
            if n_neg + n_pos == 0:
                raise TrainingError("KNN needs a non-empty training set")
            return KnnModel(X=X, y=y.astype(np.float64), k=min(params.k_neighbors, X.shape[0]))
        case Family.rf:
            return fit_random_forest(
                X, y, params, balanced_weights(n_neg, n_pos), feature_names, n_jobs=n_jobs
            )
        case Family.gbm:
            return fit_gbm(X, y, params, scale_pos_weight(n_neg, n_pos), feature_names)


@final
@dataclass(frozen=True)
class Pipeline:
    """Min-max parameters fitted on the training rows plus the classifier fitted after scaling."""

    family: Family
    params: Hyperparams
    normalization: NormalizationParams
    model: Classifier

    def transform(self, matrix: FeatureMatrix) -> FeatureMatrix:
        return apply_minmax(self.normalization, matrix)

    def predict_proba(self, matrix: FeatureMatrix) -> np.ndarray:
        return self.model.predict_proba(self.transform(matrix).values)

    def cut(self, params: Hyperparams) -> "Pipeline":
        """The pipeline `params` would fit, cut from this one fitted with larger nested values."""
        if not isinstance(self.model, TreeEnsemble) or not contains(self.family, self.params, params):
            raise TrainingError(
                f"A {self.family.value} model fitted with {self.params} does not contain {params}"
            )
        max_depth = None if params.max_depth == self.params.max_depth else params.max_depth
        return replace(self, params=params, model=self.model.truncated(params.n_trees, max_depth))


def _depth_rank(max_depth: int | None) -> float:
    return math.inf if max_depth is None else max_depth


def contains(family: Family, fitted: Hyperparams, params: Hyperparams) -> bool:
    """Whether cutting a model fitted with `fitted` yields exactly the model `params` fits."""
    nested = family.nested_params
    if params.model_copy(update={name: getattr(fitted, name) for name in nested}) != fitted:
        return False
    if "n_trees" in nested and params.n_trees > fitted.n_trees:
        return False
    return "max_depth" not in nested or _depth_rank(params.max_depth) <= _depth_rank(fitted.max_depth)


def covering_params(family: Family, cells: list[Hyperparams]) -> Hyperparams:
    """The smallest fit every cell can be cut from. Cells must differ only in nested values."""
    update: dict[str, object] = {}
    if "n_trees" in family.nested_params:
        update["n_trees"] = max(c.n_trees for c in cells)
    if "max_depth" in family.nested_params:
        update["max_depth"] = max((c.max_depth for c in cells), key=_depth_rank)
    return cells[0].model_copy(update=update)


def fit_pipeline(
    family: Family,
    train: FeatureMatrix,
    params: Hyperparams,
    n_jobs: int = 1,
) -> Pipeline:
    normalization = fit_minmax(train)
    scaled = apply_minmax(normalization, train)
    model = fit_family(
        family,
        scaled.values,
        binary_targets(scaled),
        params,
        feature_names=list(train.feature_names),
        n_jobs=n_jobs,
    )
    return Pipeline(family=family, params=params, normalization=normalization, model=model)
