import logging
import time
from typing import Any, Dict, Optional, Tuple

import numpy as np

from shapley_forest.core.config import settings
from shapley_forest.core.exceptions import EstimationError, ForestError
from shapley_forest.models.dataset import Dataset
from shapley_forest.models.forest import Forest, OobAccumulator
from shapley_forest.schemas.forest import ForestParams
from shapley_forest.tasks.forest_tasks import grow_tree_task, init_training_data
from shapley_forest.tasks.worker_pool import run_tasks

logger = logging.getLogger(__name__)


def fit(dataset: Dataset, params: ForestParams, n_jobs: Optional[int] = None) -> Forest:
    """Grow params.num_trees CART trees; bit-identical for any n_jobs"""
    resolved = params.resolve(dataset.n, dataset.p)
    start = time.perf_counter()
    trees = run_tasks(
        grow_tree_task,
        list(range(resolved.num_trees)),
        n_jobs=n_jobs or settings.n_jobs,
        initializer=init_training_data,
        initargs=(dataset.features, dataset.output, resolved),
    )
    forest = Forest(trees=tuple(trees), params=resolved, n=dataset.n, p=dataset.p)
    logger.info(
        f"Fitted forest: {forest.num_trees} trees, {forest.total_nodes()} nodes, "
        f"mean depth {forest.mean_depth():.1f} in {time.perf_counter() - start:.2f}s"
    )
    if forest.split_count() == 0:
        logger.warning("Forest never split; every tree is a single leaf")
    return forest


def check_compatible(forest: Forest, dataset: Dataset) -> None:
    if (forest.n, forest.p) != (dataset.n, dataset.p):
        raise ForestError(
            f"forest was fit on n={forest.n}, p={forest.p} but the dataset has n={dataset.n}, p={dataset.p}"
        )


def predict_many(forest: Forest, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != forest.p:
        raise ForestError(f"query has {X.shape[1]} coordinates, forest expects p={forest.p}")
    total = np.zeros(X.shape[0])
    for tree in forest.trees:
        total += tree.predict(X)
    return total / forest.num_trees


def predict(forest: Forest, x: np.ndarray) -> float:
    """Average over trees of the leaf mean reached by x"""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ForestError("predict expects a single query vector")
    return float(predict_many(forest, x[None, :])[0])


def oob_predict(forest: Forest, dataset: Dataset) -> np.ndarray:
    """Out-of-bag prediction per row, NaN where every tree used the row"""
    check_compatible(forest, dataset)
    accumulator = OobAccumulator(dataset.n)
    for t, tree in enumerate(forest.trees):
        rows = forest.oob_rows(t)
        accumulator.add(rows, tree.predict(dataset.features[rows]))
    return accumulator.result()


def output_variance(dataset: Dataset) -> float:
    sigma = dataset.output_variance()
    if sigma <= 0:
        raise EstimationError("output column is constant; explained variance is undefined")
    return sigma


def explained_variance(output: np.ndarray, predictions: np.ndarray, sigma: float) -> Tuple[float, int]:
    """
    1 - mean squared error / sigma over the rows that have a prediction.

    Returns the fraction and the number of covered rows.
    """
    covered = ~np.isnan(predictions)
    count = int(covered.sum())
    if count == 0:
        raise EstimationError("no row has an out-of-bag prediction")
    residuals = output[covered] - predictions[covered]
    return 1.0 - float(np.mean(residuals**2)) / sigma, count


def oob_explained_variance(forest: Forest, dataset: Dataset) -> float:
    sigma = output_variance(dataset)
    value, covered = explained_variance(dataset.output, oob_predict(forest, dataset), sigma)
    if covered < dataset.n:
        logger.warning(f"{dataset.n - covered} rows have no out-of-bag prediction and were skipped")
    return value


def diagnostics(forest: Forest, dataset: Dataset) -> Dict[str, Any]:
    """Summary figures stored in run reports"""
    predictions = oob_predict(forest, dataset)
    value, covered = explained_variance(dataset.output, predictions, output_variance(dataset))
    return {
        "oob_explained_variance": value,
        "oob_uncovered_rows": dataset.n - covered,
        "total_nodes": forest.total_nodes(),
        "mean_depth": forest.mean_depth(),
        "num_trees": forest.num_trees,
        "mtry": forest.params.mtry,
    }
