from concurrent.futures import ThreadPoolExecutor

import numpy as np

from app.internal.classifiers.cart import default_features_per_split, grow_classification_tree
from app.internal.classifiers.ensemble import EnsembleKind, TreeEnsemble
from app.internal.classifiers.params import ClassWeights, Hyperparams, TrainingError
from app.internal.classifiers.tree import BinnedFeatures, Tree
from app.util.log import logger


def fit_random_forest(
    X: np.ndarray,
    y: np.ndarray,
    params: Hyperparams,
    weights: ClassWeights,
    feature_names: list[str] | None = None,
    n_jobs: int = 1,
) -> TreeEnsemble:
    """
    Bagged CART trees with class weights entering as per-sample weights.

    Each tree draws from its own RNG stream spawned from `params.seed`, so the
    forest is identical for any `n_jobs` and its first n trees are the forest
    fitted with `n_trees=n`.
    """
    if np.unique(y).size != 2:
        raise TrainingError("Random forest needs both classes in the training set")
    n_samples, n_features = X.shape
    y = y.astype(np.float64)
    base_weights = np.where(y == 1, weights.w_pos, weights.w_neg)
    per_split = params.features_per_split or default_features_per_split(n_features)
    tree_params = params.model_copy(update={"features_per_split": per_split})
    streams = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    binned = BinnedFeatures.from_matrix(X)

    def grow(stream: np.random.SeedSequence) -> Tree:
        rng = np.random.default_rng(stream)
        if params.bootstrap:
            counts = np.bincount(rng.integers(0, n_samples, n_samples), minlength=n_samples)
            rows = np.flatnonzero(counts)
            sample_weights = base_weights * counts
        else:
            rows = np.arange(n_samples)
            sample_weights = base_weights
        return grow_classification_tree(binned, rows, y, sample_weights, tree_params, rng)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(grow, streams))
    else:
        trees = [grow(stream) for stream in streams]

    logger.debug(
        "Fitted random forest",
        trees=len(trees),
        features_per_split=per_split,
        mean_nodes=float(np.mean([t.n_nodes for t in trees])),
    )
    return TreeEnsemble(
        trees=trees,
        kind=EnsembleKind.bagged,
        feature_names=feature_names or [f"x{i}" for i in range(n_features)],
    )
