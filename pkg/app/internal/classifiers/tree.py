"""
Flat-array decision tree shared by CART, random forests and boosted trees.

Nodes are stored in preorder (root is node 0). A leaf has `left == right == -1`.
Grown trees keep on internal nodes the value the node would have as a leaf.
Rows with `x[feature] <= threshold` descend to the left child.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Protocol, final

import numpy as np
from pydantic import BaseModel

LEAF = -1
TIE_TOLERANCE = 1e-12


class TreeNode(BaseModel, frozen=True):
    """Serialized node record. Internal nodes carry a split, leaves carry a value."""

    node_id: int
    cover: float
    feature_index: int | None = None
    threshold: float | None = None
    left: int | None = None
    right: int | None = None
    value: float | None = None

    @property
    def is_leaf(self) -> bool:
        return self.feature_index is None


@final
@dataclass(frozen=True)
class Tree:
    left: np.ndarray
    right: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.left.size

    def is_leaf(self, node: int) -> bool:
        return bool(self.left[node] == LEAF)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of X."""
        nodes = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        active = self.left[nodes] != LEAF
        while active.any():
            current = nodes[active]
            goes_left = X[rows[active], self.feature[current]] <= self.threshold[current]
            nodes[active] = np.where(goes_left, self.left[current], self.right[current])
            active = self.left[nodes] != LEAF
        return nodes

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.intp)
        for node in range(self.n_nodes):
            if not self.is_leaf(node):
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def pruned(self, max_depth: int) -> "Tree":
        """The tree with every node at `max_depth` turned into a leaf holding its own value."""
        builder = TreeBuilder()

        def emit(node: int, depth: int) -> int:
            if self.is_leaf(node) or depth >= max_depth:
                return builder.add_leaf(float(self.value[node]), float(self.cover[node]))
            at = builder.add_split(int(self.feature[node]), float(self.threshold[node]), float(self.value[node]))
            builder.link(at, emit(int(self.left[node]), depth + 1), emit(int(self.right[node]), depth + 1))
            return at

        emit(0, 0)
        return builder.build()

    def to_records(self) -> list[TreeNode]:
        records: list[TreeNode] = []
        for node in range(self.n_nodes):
            if self.is_leaf(node):
                records.append(
                    TreeNode(node_id=node, cover=float(self.cover[node]), value=float(self.value[node]))
                )
            else:
                records.append(
                    TreeNode(
                        node_id=node,
                        cover=float(self.cover[node]),
                        feature_index=int(self.feature[node]),
                        threshold=float(self.threshold[node]),
                        left=int(self.left[node]),
                        right=int(self.right[node]),
                    )
                )
        return records

    @classmethod
    def from_records(cls, records: list[TreeNode]) -> "Tree":
        ordered = sorted(records, key=lambda r: r.node_id)
        return cls(
            left=np.array([LEAF if r.left is None else r.left for r in ordered], dtype=np.intp),
            right=np.array([LEAF if r.right is None else r.right for r in ordered], dtype=np.intp),
            feature=np.array(
                [LEAF if r.feature_index is None else r.feature_index for r in ordered], dtype=np.intp
            ),
            threshold=np.array([np.nan if r.threshold is None else r.threshold for r in ordered]),
            value=np.array([np.nan if r.value is None else r.value for r in ordered]),
            cover=np.array([r.cover for r in ordered]),
        )


@final
class TreeBuilder:
    """Collects nodes in preorder while a learner grows a tree."""

    def __init__(self):
        self._left: list[int] = []
        self._right: list[int] = []
        self._feature: list[int] = []
        self._threshold: list[float] = []
        self._value: list[float] = []
        self._cover: list[float] = []

    def add_leaf(self, value: float, cover: float) -> int:
        return self._add(LEAF, np.nan, value, cover)

    def add_split(self, feature: int, threshold: float, value: float = np.nan) -> int:
        """Reserve an internal node; children are attached with `link` once grown."""
        return self._add(feature, threshold, value, 0.0)

    def link(self, node: int, left: int, right: int):
        self._left[node] = left
        self._right[node] = right

    def _add(self, feature: int, threshold: float, value: float, cover: float) -> int:
        self._left.append(LEAF)
        self._right.append(LEAF)
        self._feature.append(feature)
        self._threshold.append(threshold)
        self._value.append(value)
        self._cover.append(cover)
        return len(self._left) - 1

    def build(self) -> Tree:
        left = np.array(self._left, dtype=np.intp)
        right = np.array(self._right, dtype=np.intp)
        cover = np.array(self._cover)
        # internal covers are the exact sum of their children
        for node in range(left.size - 1, -1, -1):
            if left[node] != LEAF:
                cover[node] = cover[left[node]] + cover[right[node]]
        return Tree(
            left=left,
            right=right,
            feature=np.array(self._feature, dtype=np.intp),
            threshold=np.array(self._threshold),
            value=np.array(self._value),
            cover=cover,
        )



@final
@dataclass(frozen=True)
class BinnedFeatures:
    """
    Feature columns recoded by the rank of each value among the column's distinct values.

    All features share one bin axis: feature f owns bins `offsets[f]:offsets[f + 1]`,
    `codes[i, f]` is the bin of row i and `values[b]` is the value behind bin b. Candidate
    splits sit between consecutive bins of a feature, which are the midpoints between
    consecutive distinct values of the column.
    """

    codes: np.ndarray
    values: np.ndarray
    offsets: np.ndarray

    @classmethod
    def from_matrix(cls, X: np.ndarray) -> "BinnedFeatures":
        codes = np.empty(X.shape, dtype=np.intp)
        values: list[np.ndarray] = []
        offsets = [0]
        for f in range(X.shape[1]):
            distinct, inverse = np.unique(X[:, f], return_inverse=True)
            codes[:, f] = inverse.reshape(-1) + offsets[-1]
            values.append(distinct)
            offsets.append(offsets[-1] + distinct.size)
        return cls(
            codes=codes,
            values=np.concatenate(values) if values else np.empty(0),
            offsets=np.array(offsets, dtype=np.intp),
        )

    @property
    def n_features(self) -> int:
        return self.offsets.size - 1

    @property
    def n_bins(self) -> int:
        return int(self.offsets[-1])

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)


class SplitCriterion(Protocol):
    """
    Scores nodes and candidate splits from per-row statistics summed over rows.
    `sums`, `left` and `right` hold one row per statistic, in the order the grower got them.
    """

    min_gain: float
    """A node splits only when its best gain exceeds this."""

    def node_values(self, sums: np.ndarray) -> np.ndarray: ...

    def is_terminal(self, sums: np.ndarray, counts: np.ndarray) -> np.ndarray: ...

    def split_gains(
        self, left: np.ndarray, right: np.ndarray, left_counts: np.ndarray, right_counts: np.ndarray
    ) -> np.ndarray:
        """Gain of every candidate split; -inf where the split is not allowed."""
        ...


@final
@dataclass(frozen=True)
class SplitChoice:
    """Best split per node. Nodes without an allowed split have feature LEAF and gain -inf."""

    feature: np.ndarray
    threshold: np.ndarray
    last_left_bin: np.ndarray
    gain: np.ndarray


def choose_feature_sets(
    n_nodes: int, n_features: int, features_per_split: int | None, rng: np.random.Generator | None
) -> np.ndarray:
    """One sorted row of candidate features per node."""
    if features_per_split is None or features_per_split >= n_features:
        return np.broadcast_to(np.arange(n_features), (n_nodes, n_features))
    if rng is None:
        raise ValueError("Feature subsampling needs a random generator")
    draws = rng.random((n_nodes, n_features)).argsort(axis=1)[:, :features_per_split]
    return np.sort(draws, axis=1)


def find_best_splits(
    binned: BinnedFeatures,
    rows: np.ndarray,
    node_of_row: np.ndarray,
    features: np.ndarray,
    stats: np.ndarray,
    criterion: SplitCriterion,
) -> SplitChoice:
    """
    Best split of every node of one level, read off histograms of `stats` over each
    node's candidate `features`.

    Ties go to the lowest feature index, then the lowest threshold. The threshold is the
    midpoint between the largest value the node sends left and the smallest it sends right.
    """
    n_nodes, k = features.shape
    flat_features = features.reshape(-1)
    seg_sizes = binned.sizes[flat_features]
    seg_start = np.concatenate([[0], np.cumsum(seg_sizes)[:-1]])
    n_candidates = int(seg_sizes.sum())
    if k == binned.n_features:
        # every node scans every feature, so node segments repeat the shared bin axis
        positions = (node_of_row * binned.n_bins)[:, None] + binned.codes[rows]
    else:
        row_features = features[node_of_row]
        positions = (
            seg_start.reshape(n_nodes, k)[node_of_row]
            + binned.codes[rows[:, None], row_features]
            - binned.offsets[row_features]
        )
    positions = positions.reshape(-1)

    row_stats = np.repeat(stats[:, rows], k, axis=1)
    hist = np.vstack(
        [
            np.bincount(positions, minlength=n_candidates).astype(np.float64),
            *(np.bincount(positions, weights=s, minlength=n_candidates) for s in row_stats),
        ]
    )
    seg_of_bin = np.repeat(np.arange(seg_sizes.size), seg_sizes)
    start = seg_start[seg_of_bin]
    end = start + seg_sizes[seg_of_bin]
    # cum[:, j] sums the bins before j, so empty runs leave both sides bit-identical
    cum = np.zeros((hist.shape[0], n_candidates + 1))
    np.cumsum(hist, axis=1, out=cum[:, 1:])
    left = cum[:, 1:] - cum[:, start]
    right = cum[:, end] - cum[:, 1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        gains = criterion.split_gains(left[1:], right[1:], left[0], right[0])
    gains = np.where((left[0] > 0) & (right[0] > 0), gains, -np.inf)

    node_of_bin = seg_of_bin // k
    best = np.maximum.reduceat(gains, seg_start[::k])
    near = np.flatnonzero(np.isfinite(gains) & (gains >= best[node_of_bin] - TIE_TOLERANCE))
    first = near[np.flatnonzero(np.diff(node_of_bin[near], prepend=-1))]
    nonempty = np.flatnonzero(hist[0] > 0)
    after = nonempty[np.searchsorted(nonempty, first, side="right")]

    seg = seg_of_bin[first]
    chosen = flat_features[seg]
    shift = binned.offsets[chosen] - seg_start[seg]
    nodes = node_of_bin[first]
    feature = np.full(n_nodes, LEAF, dtype=np.intp)
    threshold = np.full(n_nodes, np.nan)
    last_left_bin = np.full(n_nodes, LEAF, dtype=np.intp)
    gain = np.full(n_nodes, -np.inf)
    feature[nodes] = chosen
    threshold[nodes] = (binned.values[first + shift] + binned.values[after + shift]) / 2.0
    last_left_bin[nodes] = first + shift
    gain[nodes] = gains[first]
    return SplitChoice(feature=feature, threshold=threshold, last_left_bin=last_left_bin, gain=gain)


def grow_tree(
    binned: BinnedFeatures,
    rows: np.ndarray,
    stats: np.ndarray,
    cover: np.ndarray,
    criterion: SplitCriterion,
    max_depth: int | None,
    features_per_split: int | None = None,
    rng: np.random.Generator | None = None,
) -> Tree:
    """
    Grow a tree over the training `rows`, one level at a time. `stats` holds one row per
    statistic the criterion reads and `cover` the per-row weight recorded as node cover.
    Feature subsets are drawn for the nodes of a level in node order.
    """
    left = [LEAF]
    right = [LEAF]
    feature = [LEAF]
    threshold = [np.nan]
    value = [np.nan]
    node_cover = [0.0]

    level = np.zeros(1, dtype=np.intp)
    node_of_row = np.zeros(rows.size, dtype=np.intp)
    depth = 0
    while level.size:
        counts = np.bincount(node_of_row, minlength=level.size)
        sums = np.vstack([np.bincount(node_of_row, weights=s[rows], minlength=level.size) for s in stats])
        covers = np.bincount(node_of_row, weights=cover[rows], minlength=level.size)
        for node, v, c in zip(level.tolist(), criterion.node_values(sums).tolist(), covers.tolist()):
            value[node] = v
            node_cover[node] = c

        splittable = ~criterion.is_terminal(sums, counts)
        if max_depth is not None and depth >= max_depth:
            splittable[:] = False
        if not splittable.any():
            break
        keep = splittable[node_of_row]
        rows = rows[keep]
        node_of_row = (np.cumsum(splittable) - 1)[node_of_row[keep]]
        candidates = level[splittable]
        features = choose_feature_sets(candidates.size, binned.n_features, features_per_split, rng)
        split = find_best_splits(binned, rows, node_of_row, features, stats, criterion)

        accepted = split.gain > criterion.min_gain
        next_level: list[int] = []
        for slot in np.flatnonzero(accepted).tolist():
            node = int(candidates[slot])
            children = [len(left), len(left) + 1]
            for _ in children:
                left.append(LEAF)
                right.append(LEAF)
                feature.append(LEAF)
                threshold.append(np.nan)
                value.append(np.nan)
                node_cover.append(0.0)
            left[node], right[node] = children
            feature[node] = int(split.feature[slot])
            threshold[node] = float(split.threshold[slot])
            next_level += children

        moving = accepted[node_of_row]
        rows = rows[moving]
        slots = node_of_row[moving]
        goes_right = binned.codes[rows, split.feature[slots]] > split.last_left_bin[slots]
        node_of_row = 2 * (np.cumsum(accepted) - 1)[slots] + goes_right
        level = np.array(next_level, dtype=np.intp)
        depth += 1

    builder = TreeBuilder()

    def emit(node: int) -> int:
        if left[node] == LEAF:
            return builder.add_leaf(value[node], node_cover[node])
        at = builder.add_split(feature[node], threshold[node], value[node])
        builder.link(at, emit(left[node]), emit(right[node]))
        return at

    emit(0)
    return builder.build()
