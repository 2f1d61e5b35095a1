"""
Projected forest: forest predictions conditional on a variable subset U.

Splits on variables outside U are ignored (both children are followed) and
the cells left by splits on U are intersected. Descent goes level by level
and stops before the level that would leave fewer than min_node_size
in-bag slots in the query's cell.
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from shapley_forest.core.config import settings
from shapley_forest.models.dataset import Dataset
from shapley_forest.models.forest import LEAF, Forest, sequential_mean
from shapley_forest.models.projection import ProjectedPrediction, ProjectionQuery
from shapley_forest.models.subsets import VarSubset
from shapley_forest.services.forest import check_compatible, explained_variance, output_variance
from shapley_forest.tasks.projection_tasks import init_projection_data, project_subset_task
from shapley_forest.tasks.worker_pool import run_tasks

logger = logging.getLogger(__name__)


def prf_predict_tree(
    forest: Forest,
    tree_index: int,
    dataset: Dataset,
    query: ProjectionQuery,
) -> ProjectedPrediction:
    """Pointwise projected descent of one tree; the reference for the batched path"""
    check_compatible(forest, dataset)
    tree = forest.trees[tree_index]
    X_slots = dataset.features[tree.inbag]
    y_slots = dataset.output[tree.inbag]
    x = query.full_point()
    subset = query.subset
    min_size = forest.params.min_node_size

    alive = np.ones(len(tree.inbag), dtype=bool)
    frontier = [0]
    level = 0
    while any(tree.feature[node] != LEAF for node in frontier):
        candidate = alive.copy()
        next_frontier = []
        for node in frontier:
            j = int(tree.feature[node])
            if j == LEAF:
                next_frontier.append(node)
            elif j in subset:
                goes_left = x[j] <= tree.threshold[node]
                next_frontier.append(tree.left[node] if goes_left else tree.right[node])
                candidate &= (X_slots[:, j] <= tree.threshold[node]) == goes_left
            else:
                next_frontier.extend((tree.left[node], tree.right[node]))
        if candidate.sum() < min_size:
            break
        alive, frontier = candidate, next_frontier
        level += 1

    return ProjectedPrediction(
        value=sequential_mean(y_slots[alive]),
        support=int(alive.sum()),
        stop_level=level,
    )


def prf_oob_estimates(
    forest: Forest,
    dataset: Dataset,
    subsets: Sequence[VarSubset],
    n_jobs: Optional[int] = None,
) -> List[np.ndarray]:
    """Per-subset length-n OOB projected predictions, in the order of ``subsets``"""
    check_compatible(forest, dataset)
    return run_tasks(
        project_subset_task,
        list(subsets),
        n_jobs=n_jobs or settings.n_jobs,
        initializer=init_projection_data,
        initargs=(forest, dataset.features, dataset.output),
    )


def values_from_predictions(dataset: Dataset, predictions: np.ndarray) -> Tuple[float, int]:
    """v_hat and the number of covered rows for one subset's OOB predictions"""
    return explained_variance(dataset.output, predictions, output_variance(dataset))


def estimate_v(forest: Forest, dataset: Dataset, subset: VarSubset) -> float:
    """v_hat(U) = 1 - sum (Y_i - PRF_i)^2 / (n sigma_Y) over OOB-covered rows"""
    output_variance(dataset)
    (predictions,) = prf_oob_estimates(forest, dataset, [subset], n_jobs=1)
    value, covered = values_from_predictions(dataset, predictions)
    if covered < dataset.n:
        logger.warning(f"Subset {{{subset.key()}}}: {dataset.n - covered} rows without OOB coverage")
    return value
