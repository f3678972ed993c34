from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import final

import numpy as np
from pydantic import BaseModel
from scipy.special import expit

from app.internal.classifiers.tree import Tree, TreeNode


class EnsembleKind(str, Enum):
    bagged = "Bagged"
    boosted = "Boosted"


@final
@dataclass(frozen=True)
class TreeEnsemble:
    """
    Bagged: probability = mean of leaf values.
    Boosted: probability = sigmoid(base_score + sum of leaf values).
    """

    trees: list[Tree]
    kind: EnsembleKind
    base_score: float = 0.0
    feature_names: list[str] = field(default_factory=list)

    @property
    def output_space(self) -> str:
        return "probability" if self.kind == EnsembleKind.bagged else "margin"

    def predict_raw(self, X: np.ndarray) -> np.ndarray:
        """Prediction in the explained output space (probability for Bagged, margin for Boosted)."""
        if self.kind == EnsembleKind.bagged:
            if not self.trees:
                return np.full(X.shape[0], self.base_score)
            return np.mean([tree.predict(X) for tree in self.trees], axis=0)
        margin = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            margin += tree.predict(X)
        return margin

    def truncated(self, n_trees: int, max_depth: int | None = None) -> "TreeEnsemble":
        """The first `n_trees` trees, each pruned to `max_depth` when given."""
        trees = self.trees[:n_trees]
        if max_depth is not None:
            trees = [tree.pruned(max_depth) for tree in trees]
        return replace(self, trees=trees)

    def staged_margins(self, X: np.ndarray) -> list[np.ndarray]:
        """Boosted margin after 0, 1, ..., n_trees rounds."""
        margin = np.full(X.shape[0], self.base_score)
        stages = [margin.copy()]
        for tree in self.trees:
            margin = margin + tree.predict(X)
            stages.append(margin.copy())
        return stages

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        raw = self.predict_raw(X)
        if self.kind == EnsembleKind.bagged:
            return raw
        return expit(raw)

    def to_record(self) -> "EnsembleRecord":
        return EnsembleRecord(
            kind=self.kind,
            base_score=self.base_score,
            feature_names=self.feature_names,
            trees=[TreeRecord(nodes=tree.to_records()) for tree in self.trees],
        )


class TreeRecord(BaseModel):
    nodes: list[TreeNode]


class EnsembleRecord(BaseModel):
    """JSON form of a tree ensemble. See docs/model_format.md."""

    kind: EnsembleKind
    base_score: float
    feature_names: list[str]
    trees: list[TreeRecord]

    def to_ensemble(self) -> TreeEnsemble:
        return TreeEnsemble(
            trees=[Tree.from_records(tree.nodes) for tree in self.trees],
            kind=self.kind,
            base_score=self.base_score,
            feature_names=self.feature_names,
        )

    def save(self, path: Path):
        path.write_text(self.model_dump_json())

    @classmethod
    def load(cls, path: Path) -> "EnsembleRecord":
        return cls.model_validate_json(path.read_text())
