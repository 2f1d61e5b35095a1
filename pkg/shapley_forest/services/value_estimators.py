import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from shapley_forest.core.cache import ValueCache, get_value_cache_key
from shapley_forest.core.config import settings
from shapley_forest.core.exceptions import EstimationError
from shapley_forest.models.dataset import Dataset
from shapley_forest.models.forest import Forest
from shapley_forest.models.subsets import VarSubset
from shapley_forest.schemas.run import Strategy
from shapley_forest.services import forest as forest_service
from shapley_forest.services.projected_forest import prf_oob_estimates, values_from_predictions
from shapley_forest.tasks.marginal_tasks import init_marginal_data, marginal_subset_task
from shapley_forest.tasks.worker_pool import run_tasks

logger = logging.getLogger(__name__)


@dataclass
class EstimatorSpec:
    """How v_hat(U) is computed, plus the fitted forest and data it works on"""

    strategy: Strategy
    forest: Forest
    dataset: Dataset
    seed: int = 0
    marginal_draws: int = field(default_factory=lambda: settings.marginal_draws)
    depth_cap: int = field(default_factory=lambda: settings.retrain_depth_cap)
    small_subset: int = field(default_factory=lambda: settings.retrain_small_subset)
    n_jobs: int = field(default_factory=lambda: settings.n_jobs)

    def __post_init__(self):
        self.strategy = Strategy(self.strategy)
        if self.marginal_draws < 1:
            raise EstimationError(f"marginal draws must be >= 1, got {self.marginal_draws}")
        forest_service.check_compatible(self.forest, self.dataset)


@dataclass(frozen=True)
class ValueEstimate:
    subset: VarSubset
    value: float
    covered: int


def retrain_params(spec: EstimatorSpec, subset: VarSubset):
    """Initial forest params with mtry = ceil(|U|/3), the small-subset depth cap and a per-subset seed"""
    params = spec.forest.params
    max_depth = spec.depth_cap if subset.size <= spec.small_subset else params.max_depth
    seed_words = np.random.SeedSequence(entropy=spec.seed, spawn_key=(subset.mask,)).generate_state(2)
    return params.model_copy(
        update={
            "mtry": max(1, math.ceil(subset.size / 3)),
            "max_depth": max_depth,
            "seed": int(seed_words[0]) << 32 | int(seed_words[1]),
        }
    )


def _retrain_value(spec: EstimatorSpec, subset: VarSubset) -> Tuple[float, int]:
    sub_dataset = spec.dataset.select_columns(list(subset.indices))
    sub_forest = forest_service.fit(sub_dataset, retrain_params(spec, subset), n_jobs=spec.n_jobs)
    predictions = forest_service.oob_predict(sub_forest, sub_dataset)
    return values_from_predictions(sub_dataset, predictions)


def _predictions(spec: EstimatorSpec, subsets: List[VarSubset]) -> List[np.ndarray]:
    if spec.strategy == Strategy.PRF:
        return prf_oob_estimates(spec.forest, spec.dataset, subsets, n_jobs=spec.n_jobs)
    return run_tasks(
        marginal_subset_task,
        subsets,
        n_jobs=spec.n_jobs,
        initializer=init_marginal_data,
        initargs=(spec.forest, spec.dataset.features, spec.marginal_draws, spec.seed),
    )


def values_of(
    spec: EstimatorSpec,
    subsets: Sequence[VarSubset],
    cache: Optional[ValueCache] = None,
) -> Dict[VarSubset, ValueEstimate]:
    """
    v_hat for every distinct subset, computed once each.

    The full set short-circuits to the initial forest's OOB explained
    variance for every strategy.
    """
    forest_service.output_variance(spec.dataset)
    cache = cache or ValueCache(enabled=False)
    results: Dict[VarSubset, ValueEstimate] = {}
    pending: List[VarSubset] = []
    for subset in dict.fromkeys(subsets):
        if subset.is_empty:
            raise EstimationError("value of the empty subset is fixed to 0 and never estimated")
        cached = cache.get(get_value_cache_key(spec.strategy.value, subset.key()))
        if cached is not None:
            results[subset] = cached
        elif subset.is_full:
            predictions = forest_service.oob_predict(spec.forest, spec.dataset)
            value, covered = values_from_predictions(spec.dataset, predictions)
            results[subset] = ValueEstimate(subset, value, covered)
        else:
            pending.append(subset)

    if spec.strategy == Strategy.RETRAIN:
        for subset in pending:
            value, covered = _retrain_value(spec, subset)
            results[subset] = ValueEstimate(subset, value, covered)
    elif pending:
        for subset, predictions in zip(pending, _predictions(spec, pending)):
            value, covered = values_from_predictions(spec.dataset, predictions)
            results[subset] = ValueEstimate(subset, value, covered)

    for subset in pending:
        estimate = results[subset]
        cache.set(get_value_cache_key(spec.strategy.value, subset.key()), estimate)
        if estimate.covered < spec.dataset.n:
            logger.debug(f"Subset {{{subset.key()}}}: {spec.dataset.n - estimate.covered} uncovered rows")
    negative = sum(1 for subset in pending if results[subset].value < 0)
    if negative:
        logger.warning(f"{negative} of {len(pending)} subsets have a negative value estimate")
    logger.info(f"Estimated {len(pending)} subset values with strategy {spec.strategy.value}")
    return {subset: results[subset] for subset in dict.fromkeys(subsets)}


def value_of(spec: EstimatorSpec, subset: VarSubset) -> float:
    return values_of(spec, [subset])[subset].value
