import math

import numpy as np
from pydantic import BaseModel, Field

from app.internal.errors import ScopeError
from app.internal.models import FeatureMatrix, binary_targets


class StratificationError(ScopeError):
    pass


class SplitPlan(BaseModel, frozen=True):
    seed: int = 42
    test_fraction: float = Field(default=0.2, gt=0, lt=1)
    k_folds: int = Field(default=5, ge=2)


type Fold = tuple[np.ndarray, np.ndarray]


def _class_indices(targets: np.ndarray) -> list[np.ndarray]:
    classes = np.unique(targets)
    if classes.size != 2:
        raise StratificationError(
            f"Stratification needs exactly two classes, found {classes.size}"
        )
    return [np.flatnonzero(targets == c) for c in classes]


def stratified_split_indices(targets: np.ndarray, plan: SplitPlan) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(plan.seed)
    train: list[np.ndarray] = []
    test: list[np.ndarray] = []
    for members in _class_indices(targets):
        if members.size < 2:
            raise StratificationError(
                f"Class has {members.size} sample(s); a stratified split needs at least 2"
            )
        n_test = math.floor(plan.test_fraction * members.size + 0.5)
        n_test = min(max(n_test, 1), members.size - 1)
        shuffled = rng.permutation(members)
        test.append(shuffled[:n_test])
        train.append(shuffled[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_split(matrix: FeatureMatrix, plan: SplitPlan) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Class-preserving train/test split. Row order inside each part follows the input."""
    train_idx, test_idx = stratified_split_indices(binary_targets(matrix), plan)
    return matrix.take(train_idx), matrix.take(test_idx)


def stratified_kfold_indices(targets: np.ndarray, plan: SplitPlan) -> list[Fold]:
    classes = _class_indices(targets)
    minority = min(members.size for members in classes)
    if plan.k_folds > minority:
        raise StratificationError(
            f"{plan.k_folds} folds requested but the minority class has only {minority} samples"
        )
    rng = np.random.default_rng(plan.seed)
    fold_members: list[list[np.ndarray]] = [[] for _ in range(plan.k_folds)]
    for members in classes:
        for fold, chunk in enumerate(np.array_split(rng.permutation(members), plan.k_folds)):
            fold_members[fold].append(chunk)

    everything = np.arange(targets.size)
    folds: list[Fold] = []
    for chunks in fold_members:
        valid = np.sort(np.concatenate(chunks))
        folds.append((np.setdiff1d(everything, valid, assume_unique=True), valid))
    return folds


def stratified_kfold(matrix: FeatureMatrix, plan: SplitPlan) -> list[Fold]:
    return stratified_kfold_indices(binary_targets(matrix), plan)
