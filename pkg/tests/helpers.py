import numpy as np

from app.internal.classifiers.ensemble import EnsembleKind, TreeEnsemble
from app.internal.classifiers.tree import Tree, TreeBuilder
from app.internal.models import CohortLabel, FeatureMatrix


def make_matrix(values: np.ndarray | list[list[float]], targets: np.ndarray | list[int]) -> FeatureMatrix:
    values = np.asarray(values, dtype=np.float64)
    labels = tuple(CohortLabel.PD if t == 1 else CohortLabel.HC for t in targets)
    return FeatureMatrix(
        feature_names=tuple(f"f{j}" for j in range(values.shape[1])),
        values=values,
        labels=labels,
        participant_ids=tuple(f"P{i:03d}" for i in range(values.shape[0])),
    )


def stump(feature: int, threshold: float, left: float, right: float, covers: tuple[float, float]) -> Tree:
    builder = TreeBuilder()
    root = builder.add_split(feature, threshold)
    left_node = builder.add_leaf(left, covers[0])
    right_node = builder.add_leaf(right, covers[1])
    builder.link(root, left_node, right_node)
    return builder.build()


def random_tree(rng: np.random.Generator, n_features: int, max_depth: int) -> Tree:
    """A random tree with integer covers and thresholds in [0, 1]."""
    builder = TreeBuilder()

    def grow(depth: int) -> int:
        if depth >= max_depth or (depth > 0 and rng.random() < 0.3):
            return builder.add_leaf(float(rng.normal()), float(rng.integers(1, 20)))
        node = builder.add_split(int(rng.integers(n_features)), float(rng.random()))
        left = grow(depth + 1)
        right = grow(depth + 1)
        builder.link(node, left, right)
        return node

    grow(0)
    return builder.build()


def random_ensemble(rng: np.random.Generator, kind: EnsembleKind) -> TreeEnsemble:
    """Up to 5 trees of depth up to 4 over 1 to 10 features."""
    n_features = int(rng.integers(1, 11))
    trees = [random_tree(rng, n_features, int(rng.integers(1, 5))) for _ in range(int(rng.integers(1, 6)))]
    return TreeEnsemble(
        trees=trees,
        kind=kind,
        base_score=float(rng.normal()) if kind == EnsembleKind.boosted else 0.0,
        feature_names=[f"x{i}" for i in range(n_features)],
    )
