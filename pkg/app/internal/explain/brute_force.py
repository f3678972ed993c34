import math
from collections.abc import Mapping

import numpy as np

from app.internal.classifiers.ensemble import EnsembleKind, TreeEnsemble
from app.internal.classifiers.tree import Tree
from app.internal.errors import ScopeError
from app.internal.explain.treeshap import check_covers, feature_row

MAX_ORACLE_FEATURES = 15


class OracleTooLargeError(ScopeError):
    pass


def coalition_values(tree: Tree, x: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """
    Conditional expectation of the tree output for every coalition in `masks`
    (bit i set = feature i fixed to x[i]); unset features branch by cover.
    """
    check_covers(tree)

    def expectation(node: int) -> np.ndarray:
        if tree.is_leaf(node):
            return np.full(masks.size, tree.value[node])
        feature = int(tree.feature[node])
        left, right = int(tree.left[node]), int(tree.right[node])
        left_values = expectation(left)
        right_values = expectation(right)
        followed = left_values if x[feature] <= tree.threshold[node] else right_values
        averaged = (tree.cover[left] * left_values + tree.cover[right] * right_values) / tree.cover[node]
        return np.where((masks >> feature) & 1 == 1, followed, averaged)

    return expectation(0)


def brute_force_shapley(ensemble: TreeEnsemble, x: Mapping[str, float] | np.ndarray) -> dict[str, float]:
    """Shapley values by enumerating all 2^M coalitions. Test oracle for `treeshap`."""
    row = feature_row(ensemble, x)
    n_features = row.size
    if n_features > MAX_ORACLE_FEATURES:
        raise OracleTooLargeError(
            f"Subset enumeration over {n_features} features needs 2^{n_features} = "
            + f"{2**n_features:,} coalition evaluations per tree ({len(ensemble.trees)} trees); "
            + f"the limit is {MAX_ORACLE_FEATURES} features"
        )
    masks = np.arange(2**n_features, dtype=np.int64)
    per_tree = [coalition_values(tree, row, masks) for tree in ensemble.trees]
    if not per_tree:
        values = np.zeros(masks.size)
    elif ensemble.kind == EnsembleKind.bagged:
        values = np.mean(per_tree, axis=0)
    else:
        # base_score cancels in every marginal contribution
        values = np.sum(per_tree, axis=0)

    sizes = np.bitwise_count(masks)
    weights = np.array(
        [
            math.factorial(s) * math.factorial(n_features - s - 1) / math.factorial(n_features)
            if s < n_features
            else 0.0
            for s in range(n_features + 1)
        ]
    )
    phi: dict[str, float] = {}
    for i, name in enumerate(ensemble.feature_names):
        without = masks[(masks >> i) & 1 == 0]
        gains = values[without | (1 << i)] - values[without]
        phi[name] = float(np.sum(weights[sizes[without]] * gains))
    return phi
