"""
Batched projected descent: all OOB rows of a tree go down together.

Queries that agreed on every applied split share a cell; a cell's training
slots are those that agree with its queries too. At each level a cell is
refined by the count of its conditioning thresholds below each point, one
count per variable of the subset, which fixes the side of every threshold.
"""
from typing import Tuple

import numpy as np

from shapley_forest.models.forest import LEAF, Forest, OobAccumulator, Tree, group_means
from shapley_forest.models.subsets import VarSubset


def _count_thresholds_below(
    pair_cells: np.ndarray,
    thresholds: np.ndarray,
    point_cells: np.ndarray,
    values: np.ndarray,
    num_cells: int,
) -> np.ndarray:
    """For each point, the number of thresholds of its own cell strictly below its value"""
    T = len(thresholds)
    cells = np.concatenate([pair_cells, point_cells])
    keys = np.concatenate([thresholds, values])
    # points sort before thresholds on ties, so x == t is not counted
    kind = np.concatenate([np.ones(T, dtype=np.int8), np.zeros(len(values), dtype=np.int8)])
    order = np.lexsort((kind, keys, cells))
    running = np.cumsum(kind[order])
    per_cell = np.bincount(pair_cells, minlength=num_cells)
    before_cell = np.cumsum(per_cell) - per_cell

    counts = np.empty(len(values), dtype=np.intp)
    is_point = order >= T
    point_ids = order[is_point] - T
    counts[point_ids] = running[is_point] - before_cell[cells[order[is_point]]]
    return counts


def _expand_frontier(
    tree: Tree,
    in_subset: np.ndarray,
    pair_cells: np.ndarray,
    pair_nodes: np.ndarray,
    parents: np.ndarray,
    representatives: np.ndarray,
    num_cells: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Frontier (cell, node) pairs for the refined cells, one level down"""
    order = np.argsort(pair_cells, kind="stable")
    nodes_sorted = pair_nodes[order]
    per_cell = np.bincount(pair_cells, minlength=num_cells)
    starts = np.cumsum(per_cell) - per_cell

    lengths = per_cell[parents]
    cells = np.repeat(np.arange(len(parents)), lengths)
    offsets = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    nodes = nodes_sorted[np.repeat(starts[parents], lengths) + offsets]

    feature = tree.feature[nodes]
    leaf = feature == LEAF
    conditioned = ~leaf & in_subset[np.where(leaf, 0, feature)]
    free = ~leaf & ~conditioned

    cond_nodes = nodes[conditioned]
    goes_left = representatives[cells[conditioned], tree.feature[cond_nodes]] <= tree.threshold[cond_nodes]
    chosen = np.where(goes_left, tree.left[cond_nodes], tree.right[cond_nodes])

    new_cells = np.concatenate([cells[leaf], cells[free], cells[free], cells[conditioned]])
    new_nodes = np.concatenate([nodes[leaf], tree.left[nodes[free]], tree.right[nodes[free]], chosen])
    return new_cells, new_nodes


def project_tree(
    tree: Tree,
    X: np.ndarray,
    y: np.ndarray,
    queries: np.ndarray,
    subset: VarSubset,
    min_node_size: int,
) -> np.ndarray:
    """
    Projected predictions of one tree for many query rows at once.

    Queries whose refined cell would hold fewer than min_node_size slots
    stop with their current cell mean.
    """
    X_slots = X[tree.inbag]
    y_slots = y[tree.inbag]
    in_subset = np.zeros(X.shape[1], dtype=bool)
    in_subset[list(subset.indices)] = True

    predictions = np.empty(len(queries))
    slot_cell = np.zeros(len(tree.inbag), dtype=np.intp)
    query_cell = np.zeros(len(queries), dtype=np.intp)
    active = np.arange(len(queries))
    pair_cells = np.zeros(1, dtype=np.intp)
    pair_nodes = np.zeros(1, dtype=np.intp)
    num_cells = 1

    while active.size and (tree.feature[pair_nodes] != LEAF).any():
        live = np.flatnonzero(slot_cell >= 0)
        point_cells = np.concatenate([query_cell[active], slot_cell[live]])
        points = np.vstack([queries[active], X_slots[live]])

        feature = tree.feature[pair_nodes]
        conditioned = (feature != LEAF) & in_subset[np.where(feature == LEAF, 0, feature)]
        signature = [point_cells]
        for j in np.unique(feature[conditioned]):
            on_j = conditioned & (feature == j)
            signature.append(
                _count_thresholds_below(
                    pair_cells[on_j],
                    tree.threshold[pair_nodes[on_j]],
                    point_cells,
                    points[:, j],
                    num_cells,
                )
            )
        keys, inverse = np.unique(np.stack(signature, axis=1), axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        query_sub, slot_sub = inverse[: active.size], inverse[active.size:]
        sub_sizes = np.bincount(slot_sub, minlength=len(keys))

        stopping = sub_sizes[query_sub] < min_node_size
        if stopping.any():
            means = group_means(slot_cell[live], y_slots[live], num_cells)
            predictions[active[stopping]] = means[query_cell[active[stopping]]]

        kept = np.zeros(len(keys), dtype=bool)
        kept[query_sub[~stopping]] = True
        renumber = np.cumsum(kept) - 1
        active = active[~stopping]
        query_cell[active] = renumber[query_sub[~stopping]]
        slot_cell = np.full(len(tree.inbag), -1, dtype=np.intp)
        slot_cell[live[kept[slot_sub]]] = renumber[slot_sub[kept[slot_sub]]]

        parents = keys[kept, 0]
        representatives = np.empty((int(kept.sum()), X.shape[1]))
        representatives[query_cell[active]] = queries[active]
        pair_cells, pair_nodes = _expand_frontier(
            tree, in_subset, pair_cells, pair_nodes, parents, representatives, num_cells
        )
        num_cells = int(kept.sum())

    if active.size:
        live = np.flatnonzero(slot_cell >= 0)
        means = group_means(slot_cell[live], y_slots[live], num_cells)
        predictions[active] = means[query_cell[active]]
    return predictions


def project_subset(forest: Forest, X: np.ndarray, y: np.ndarray, subset: VarSubset) -> np.ndarray:
    """OOB-aggregated projected predictions for every row, NaN where uncovered"""
    accumulator = OobAccumulator(forest.n)
    for t, tree in enumerate(forest.trees):
        rows = forest.oob_rows(t)
        if rows.size:
            accumulator.add(rows, project_tree(tree, X, y, X[rows], subset, forest.params.min_node_size))
    return accumulator.result()

