"""
Exact path-dependent Shapley values for tree ensembles.

Features absent from a coalition are integrated out by descending both children of a
split in proportion to their training cover. The per-tree recursion keeps, for the
unique features on the current root-to-node path, the fraction of "zero" (feature
absent) and "one" (feature present) paths flowing through, plus the permutation
weights of every coalition size; it runs in O(leaves * depth^2) per tree.

The traversal visits every node regardless of the explained row; only the "one"
fractions (whether the row follows a branch) depend on the row. They are carried as
arrays so a whole batch of rows is explained in one pass over each tree.
"""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel

from app.internal.classifiers.ensemble import EnsembleKind, TreeEnsemble
from app.internal.classifiers.tree import LEAF, Tree
from app.internal.errors import ScopeError
from app.internal.models import CohortLabel


class ModelIntegrityError(ScopeError):
    pass


class MissingFeatureError(ScopeError):
    pass


class Attribution(BaseModel, frozen=True):
    participant_id: str
    label: CohortLabel | None = None
    base_value: float
    phi: dict[str, float]
    prediction: float
    output_space: str = "probability"

    def additivity_gap(self) -> float:
        return abs(self.base_value + sum(self.phi.values()) - self.prediction)


def check_covers(tree: Tree):
    if (tree.cover <= 0).any():
        node = int(np.flatnonzero(tree.cover <= 0)[0])
        raise ModelIntegrityError(f"Node {node} has cover {tree.cover[node]}; covers must be positive")
    internal = np.flatnonzero(tree.left != LEAF)
    sums = tree.cover[tree.left[internal]] + tree.cover[tree.right[internal]]
    if not np.allclose(tree.cover[internal], sums, rtol=1e-9, atol=0.0):
        raise ModelIntegrityError("Internal node covers differ from the sum of their children")


def tree_expected_value(tree: Tree) -> float:
    """Cover-weighted mean of the leaf values."""
    check_covers(tree)
    leaves = tree.left == LEAF
    return float(np.dot(tree.cover[leaves], tree.value[leaves]) / tree.cover[0])


def expected_value(ensemble: TreeEnsemble) -> float:
    """Baseline of the explained output: mean over trees (Bagged) or base_score + sum (Boosted)."""
    per_tree = [tree_expected_value(tree) for tree in ensemble.trees]
    if ensemble.kind == EnsembleKind.bagged:
        return float(np.mean(per_tree)) if per_tree else ensemble.base_score
    return ensemble.base_score + float(np.sum(per_tree))


@dataclass(frozen=True)
class _PathEntry:
    feature: int
    zero_fraction: float
    one_fraction: np.ndarray
    weight: np.ndarray


def _extend(
    path: list[_PathEntry], zero_fraction: float, one_fraction: np.ndarray, feature: int
) -> list[_PathEntry]:
    depth = len(path)
    weights = [e.weight for e in path]
    weights.append(np.ones_like(one_fraction) if depth == 0 else np.zeros_like(one_fraction))
    for i in range(depth - 1, -1, -1):
        weights[i + 1] = weights[i + 1] + one_fraction * weights[i] * (i + 1) / (depth + 1)
        weights[i] = zero_fraction * weights[i] * (depth - i) / (depth + 1)
    entries = [*path, _PathEntry(feature, zero_fraction, one_fraction, weights[depth])]
    return [_PathEntry(e.feature, e.zero_fraction, e.one_fraction, w) for e, w in zip(entries, weights)]


def _unwind(path: list[_PathEntry], index: int) -> list[_PathEntry]:
    """Remove entry `index` from the path, undoing its effect on the permutation weights."""
    depth = len(path) - 1
    one = path[index].one_fraction
    zero = path[index].zero_fraction
    present = one != 0
    safe_one = np.where(present, one, 1.0)
    weights = [e.weight for e in path]
    next_one = weights[depth]
    for i in range(depth - 1, -1, -1):
        restored = np.where(
            present,
            next_one * (depth + 1) / ((i + 1) * safe_one),
            weights[i] * (depth + 1) / (zero * (depth - i)),
        )
        next_one = np.where(present, weights[i] - restored * zero * (depth - i) / (depth + 1), next_one)
        weights[i] = restored
    kept = path[:index] + path[index + 1 :]
    return [_PathEntry(e.feature, e.zero_fraction, e.one_fraction, w) for e, w in zip(kept, weights)]


def _unwound_sum(path: list[_PathEntry], index: int) -> np.ndarray:
    """Total permutation weight the path would have with entry `index` removed."""
    depth = len(path) - 1
    one = path[index].one_fraction
    zero = path[index].zero_fraction
    present = one != 0
    safe_one = np.where(present, one, 1.0)
    next_one = path[depth].weight
    total = np.zeros_like(next_one)
    for i in range(depth - 1, -1, -1):
        share = next_one * (depth + 1) / ((i + 1) * safe_one)
        total = total + np.where(present, share, path[i].weight * (depth + 1) / (zero * (depth - i)))
        next_one = np.where(present, path[i].weight - share * zero * (depth - i) / (depth + 1), next_one)
    return total


def tree_shap_values(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Shapley values of one tree's output for every row of `X`; each row sums to f(x) - E[f]."""
    check_covers(tree)
    phi = np.zeros(X.shape)

    def recurse(node: int, path: list[_PathEntry], zero_fraction: float, one_fraction: np.ndarray, feature: int):
        path = _extend(path, zero_fraction, one_fraction, feature)
        if tree.left[node] == LEAF:
            value = tree.value[node]
            for i in range(1, len(path)):
                entry = path[i]
                phi[:, entry.feature] += (
                    _unwound_sum(path, i) * (entry.one_fraction - entry.zero_fraction) * value
                )
            return

        split = int(tree.feature[node])
        left, right = int(tree.left[node]), int(tree.right[node])
        goes_left = (X[:, split] <= tree.threshold[node]).astype(np.float64)
        incoming_zero = 1.0
        incoming_one = np.ones(X.shape[0])
        # a feature seen higher up the path is folded into this split
        for i in range(1, len(path)):
            if path[i].feature == split:
                incoming_zero = path[i].zero_fraction
                incoming_one = path[i].one_fraction
                path = _unwind(path, i)
                break
        cover = tree.cover[node]
        recurse(left, path, tree.cover[left] / cover * incoming_zero, incoming_one * goes_left, split)
        recurse(right, path, tree.cover[right] / cover * incoming_zero, incoming_one * (1.0 - goes_left), split)

    recurse(0, [], 1.0, np.ones(X.shape[0]), LEAF)
    return phi


def feature_row(ensemble: TreeEnsemble, x: Mapping[str, float] | np.ndarray) -> np.ndarray:
    """Order `x` by the ensemble's feature names, rejecting absent or NaN features."""
    names = ensemble.feature_names
    if isinstance(x, Mapping):
        absent = [name for name in names if name not in x]
        if absent:
            raise MissingFeatureError(f"Feature {absent[0]} is missing from the explained row")
        row = np.array([float(x[name]) for name in names])
    else:
        row = np.asarray(x, dtype=np.float64)
        if row.size != len(names):
            raise MissingFeatureError(
                f"Row has {row.size} values but the model uses {len(names)} features"
            )
    missing = np.flatnonzero(np.isnan(row))
    if missing.size:
        raise MissingFeatureError(f"Feature {names[missing[0]]} is missing from the explained row")
    return row


def ensemble_shap_values(ensemble: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    """Per-tree values averaged (Bagged) or summed (Boosted), matching how the trees are combined."""
    phi = np.zeros(X.shape)
    for tree in ensemble.trees:
        phi += tree_shap_values(tree, X)
    if ensemble.kind == EnsembleKind.bagged and ensemble.trees:
        phi /= len(ensemble.trees)
    return phi


def treeshap_batch(
    ensemble: TreeEnsemble,
    X: np.ndarray,
    participant_ids: Sequence[str],
    labels: Sequence[CohortLabel | None] | None = None,
) -> list[Attribution]:
    if X.shape[1] != len(ensemble.feature_names):
        raise MissingFeatureError(
            f"Rows have {X.shape[1]} values but the model uses {len(ensemble.feature_names)} features"
        )
    missing = np.flatnonzero(np.isnan(X).any(axis=0))
    if missing.size:
        raise MissingFeatureError(
            f"Feature {ensemble.feature_names[missing[0]]} is missing from the explained rows"
        )
    labels = labels if labels is not None else [None] * X.shape[0]
    base_value = expected_value(ensemble)
    phi = ensemble_shap_values(ensemble, X)
    predictions = ensemble.predict_raw(X)
    return [
        Attribution(
            participant_id=participant_ids[i],
            label=labels[i],
            base_value=base_value,
            phi={name: float(v) for name, v in zip(ensemble.feature_names, phi[i])},
            prediction=float(predictions[i]),
            output_space=ensemble.output_space,
        )
        for i in range(X.shape[0])
    ]


def treeshap(
    ensemble: TreeEnsemble,
    x: Mapping[str, float] | np.ndarray,
    participant_id: str = "",
    label: CohortLabel | None = None,
) -> Attribution:
    """
    Attribution of the ensemble's raw output: PD probability for Bagged ensembles,
    log-odds margin for Boosted ones. Positive values push toward PD.
    """
    row = feature_row(ensemble, x)
    return treeshap_batch(ensemble, row.reshape(1, -1), [participant_id], [label])[0]
