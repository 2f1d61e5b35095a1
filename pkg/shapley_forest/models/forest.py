from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from shapley_forest.schemas.forest import ForestParams

LEAF = -1


def group_sums(groups: np.ndarray, values: np.ndarray, num_groups: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-group sums and counts.

    np.bincount adds weights one element at a time in input order, so each
    group sum is the sequential sum of its members in the order they appear.
    Every mean in the package goes through here, which keeps leaf values,
    projected cell values and OOB averages bit-for-bit comparable.
    """
    sums = np.bincount(groups, weights=values, minlength=num_groups)
    counts = np.bincount(groups, minlength=num_groups).astype(float)
    return sums, counts


def group_means(groups: np.ndarray, values: np.ndarray, num_groups: int) -> np.ndarray:
    sums, counts = group_sums(groups, values, num_groups)
    with np.errstate(invalid="ignore", divide="ignore"):
        return sums / counts


def sequential_mean(values: np.ndarray) -> float:
    """Mean of a 1-D array using the same accumulation as group_means"""
    return float(group_means(np.zeros(len(values), dtype=np.intp), values, 1)[0])


class OobAccumulator:
    """Tree-ordered running average of per-tree predictions over OOB rows"""

    def __init__(self, n: int):
        self.total = np.zeros(n)
        self.count = np.zeros(n)

    def add(self, rows: np.ndarray, predictions: np.ndarray) -> None:
        self.total[rows] += predictions
        self.count[rows] += 1.0

    def result(self) -> np.ndarray:
        """Average per row; NaN where no tree left the row out"""
        out = np.full(self.total.shape, np.nan)
        covered = self.count > 0
        out[covered] = self.total[covered] / self.count[covered]
        return out


@dataclass(frozen=True)
class Tree:
    """
    One CART tree stored as parallel node arrays.

    Node 0 is the root. ``feature[k] == LEAF`` marks a leaf; internal nodes
    send ``x[feature] <= threshold`` to ``left`` and the rest to ``right``.
    ``inbag`` holds the sorted row indices of the resample, with repeats
    under bootstrap; its positions are the tree's training slots.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_node: np.ndarray
    depth: np.ndarray
    inbag: np.ndarray

    def __post_init__(self):
        for name, dtype in (
            ("feature", np.intp),
            ("threshold", float),
            ("left", np.intp),
            ("right", np.intp),
            ("value", float),
            ("n_node", np.intp),
            ("depth", np.intp),
            ("inbag", np.intp),
        ):
            array = np.ascontiguousarray(getattr(self, name), dtype=dtype)
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature == LEAF

    @property
    def leaf_count(self) -> int:
        return int(self.is_leaf.sum())

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by standard descent for every row of X"""
        nodes = np.zeros(X.shape[0], dtype=np.intp)
        active = np.flatnonzero(self.feature[nodes] != LEAF)
        while active.size:
            current = nodes[active]
            go_left = X[active, self.feature[current]] <= self.threshold[current]
            nodes[active] = np.where(go_left, self.left[current], self.right[current])
            active = active[self.feature[nodes[active]] != LEAF]
        return nodes

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def oob_rows(self, n: int) -> np.ndarray:
        mask = np.ones(n, dtype=bool)
        mask[self.inbag] = False
        return np.flatnonzero(mask)

    def path_masks(self) -> List[int]:
        """
        Bitmask of the split variables met from the root down to each node.

        An internal node's mask includes its own split variable; a leaf's
        mask is its parent's. Children always carry larger ids than parents.
        """
        masks = [0] * self.node_count
        for node in range(self.node_count):
            if self.feature[node] == LEAF:
                continue
            masks[node] |= 1 << int(self.feature[node])
            masks[self.left[node]] = masks[node]
            masks[self.right[node]] = masks[node]
        return masks


@dataclass(frozen=True)
class Forest:
    trees: Tuple[Tree, ...]
    params: ForestParams
    n: int
    p: int

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))

    @property
    def num_trees(self) -> int:
        return len(self.trees)

    def oob_rows(self, tree_index: int) -> np.ndarray:
        return self.trees[tree_index].oob_rows(self.n)

    def total_nodes(self) -> int:
        return sum(tree.node_count for tree in self.trees)

    def mean_depth(self) -> float:
        return float(np.mean([tree.max_depth for tree in self.trees]))

    def split_count(self) -> int:
        return sum(tree.node_count - tree.leaf_count for tree in self.trees)
