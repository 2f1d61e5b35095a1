import math
from collections import deque
from typing import Optional, Tuple

import numpy as np

from shapley_forest.models.forest import LEAF, Tree, sequential_mean
from shapley_forest.schemas.forest import ForestParams, Resampling

# relative gain below which a split does not count as an improvement
MIN_RELATIVE_GAIN = 1e-12


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    """Per-tree generator: counter-based, so independent of worker count and order"""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(tree_index,)))


def draw_inbag(rng: np.random.Generator, n: int, params: ForestParams) -> np.ndarray:
    size = params.resample_size(n)
    if params.resampling == Resampling.SUBSAMPLE:
        return np.sort(rng.choice(n, size=size, replace=False))
    return np.sort(rng.integers(0, n, size=size))


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    candidates: np.ndarray,
    min_child: int,
) -> Optional[Tuple[int, float]]:
    """
    Variance-reduction split over the candidate columns of one node.

    All candidates are scored at once: sort each column, take cumulative
    sums of the centered output and score every admissible cut position.
    Ties go to the lowest variable index, then the lowest threshold.
    """
    m = len(y)
    if m < 2 or np.ptp(y) == 0:
        return None
    centered = y - y.mean()
    total = centered.sum()
    sse = float(centered @ centered)

    values = X[:, candidates]
    order = np.argsort(values, axis=0, kind="stable")
    sorted_values = np.take_along_axis(values, order, axis=0)
    left_sums = np.cumsum(centered[order], axis=0)[:-1]

    n_left = np.arange(1, m, dtype=float)[:, None]
    n_right = m - n_left
    gain = left_sums**2 / n_left + (total - left_sums) ** 2 / n_right - total**2 / m
    admissible = (
        (sorted_values[1:] > sorted_values[:-1])
        & (n_left >= min_child)
        & (n_right >= min_child)
    )
    gain = np.where(admissible, gain, -np.inf).T
    best = int(np.argmax(gain))
    k, pos = divmod(best, m - 1)
    if not np.isfinite(gain[k, pos]) or gain[k, pos] <= MIN_RELATIVE_GAIN * sse:
        return None

    low, high = sorted_values[pos, k], sorted_values[pos + 1, k]
    threshold = (low + high) / 2.0
    if not low <= threshold < high:
        threshold = low
    return int(candidates[k]), float(threshold)


def grow_tree(X: np.ndarray, y: np.ndarray, params: ForestParams, tree_index: int) -> Tree:
    """
    Grow one CART tree breadth first on a resample of (X, y).

    ``params`` must already be resolved against the data shape. Each child
    of a split keeps at least min_node_size in-bag slots (and ceil(gamma *
    parent) when gamma > 0), so nodes below 2 * min_node_size stay leaves.
    """
    n, p = X.shape
    rng = tree_rng(params.seed, tree_index)
    inbag = draw_inbag(rng, n, params)
    X_slots, y_slots = X[inbag], y[inbag]

    feature, threshold, left, right, value, n_node, depth = [], [], [], [], [], [], []

    def new_node(node_depth: int) -> int:
        for column, default in (
            (feature, LEAF), (threshold, 0.0), (left, LEAF), (right, LEAF),
            (value, 0.0), (n_node, 0), (depth, node_depth),
        ):
            column.append(default)
        return len(feature) - 1

    queue = deque([(new_node(0), np.arange(len(inbag)), 0)])
    leaves = 1
    while queue:
        node, members, node_depth = queue.popleft()
        m = len(members)
        value[node] = sequential_mean(y_slots[members])
        n_node[node] = m

        if m < 2 * params.min_node_size:
            continue
        if params.max_depth is not None and node_depth >= params.max_depth:
            continue
        if params.max_leaves is not None and leaves >= params.max_leaves:
            continue

        mtry = params.mtry
        if params.delta > 0 and rng.random() < params.delta:
            mtry = 1
        candidates = np.sort(rng.choice(p, size=mtry, replace=False))
        min_child = max(params.min_node_size, math.ceil(params.gamma * m))
        split = best_split(X_slots[members], y_slots[members], candidates, min_child)
        if split is None:
            continue

        j, t = split
        goes_left = X_slots[members, j] <= t
        feature[node], threshold[node] = j, t
        left[node] = new_node(node_depth + 1)
        right[node] = new_node(node_depth + 1)
        queue.append((left[node], members[goes_left], node_depth + 1))
        queue.append((right[node], members[~goes_left], node_depth + 1))
        leaves += 1

    return Tree(
        feature=np.array(feature),
        threshold=np.array(threshold),
        left=np.array(left),
        right=np.array(right),
        value=np.array(value),
        n_node=np.array(n_node),
        depth=np.array(depth),
        inbag=inbag,
    )
