import logging
from typing import Any, Dict

import numpy as np

from shapley_forest.models.forest import Forest, OobAccumulator
from shapley_forest.models.subsets import VarSubset

logger = logging.getLogger(__name__)

_marginal: Dict[str, Any] = {}


def subset_rng(seed: int, subset: VarSubset) -> np.random.Generator:
    """Private generator per (seed, subset), independent of evaluation order"""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(subset.mask,)))


def marginal_predictions(forest: Forest, X: np.ndarray, subset: VarSubset, draws: int, seed: int) -> np.ndarray:
    """
    OOB forest predictions with the out-of-subset block replaced by donor rows.

    Each row gets ``draws`` donors drawn uniformly among the other n - 1
    rows; the whole out-of-subset block is copied from the donor.
    """
    n = forest.n
    rng = subset_rng(seed, subset)
    donors = rng.integers(0, n - 1, size=(n, draws))
    donors += donors >= np.arange(n)[:, None]
    outside = [j for j in range(forest.p) if j not in subset]

    accumulator = OobAccumulator(n)
    for t, tree in enumerate(forest.trees):
        rows = forest.oob_rows(t)
        if not rows.size:
            continue
        points = np.repeat(X[rows], draws, axis=0)
        points[:, outside] = X[donors[rows].ravel()][:, outside]
        accumulator.add(rows, tree.predict(points).reshape(len(rows), draws).mean(axis=1))
    return accumulator.result()


def init_marginal_data(forest: Forest, X: np.ndarray, draws: int, seed: int) -> None:
    _marginal.update(forest=forest, X=X, draws=draws, seed=seed)


def marginal_subset_task(subset: VarSubset) -> np.ndarray:
    return marginal_predictions(
        _marginal["forest"], _marginal["X"], subset, _marginal["draws"], _marginal["seed"]
    )
