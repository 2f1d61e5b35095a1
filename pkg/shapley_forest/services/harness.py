"""
End-to-end runs: fit, sample subsets, estimate their values, solve.

Every random stream of a repetition is derived from (config.seed, rep), so a
configuration fully determines the non-timing content of its report. Data
generated from a spec is redrawn per repetition; CSV data is reused and only
the forest and the samplers are re-seeded.
"""
import logging
import time
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np
from scipy import stats

from shapley_forest.core.cache import ValueCache
from shapley_forest.core.exceptions import ConfigError, ShapleyForestError
from shapley_forest.crud.forests import load_forest
from shapley_forest.models.dataset import Dataset
from shapley_forest.models.forest import Forest
from shapley_forest.models.regression import ShapleyEstimate
from shapley_forest.models.subsets import SubsetDraw, SubsetTable, VarSubset
from shapley_forest.schemas.generator import Experiment, parse_schema
from shapley_forest.schemas.run import (
    AblationCell,
    AblationReport,
    KSweepReport,
    KSweepRow,
    RepetitionResult,
    RunConfig,
    RunReport,
    Sampler,
    Strategy,
    Summary,
)
from shapley_forest.services import datasets as dataset_service
from shapley_forest.services import forest as forest_service
from shapley_forest.services.ground_truth import ground_truth_for
from shapley_forest.services.shapley_solver import assemble, solve
from shapley_forest.services.subset_engine import draw_importance, draw_monte_carlo, extract_path_subsets
from shapley_forest.services.value_estimators import EstimatorSpec, ValueEstimate, values_of

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RepetitionSeeds:
    data: int
    forest: int
    sampler: int
    values: int


@dataclass
class Repetition:
    index: int
    seeds: RepetitionSeeds
    dataset: Dataset
    forest: Forest
    cache: ValueCache
    table: Optional[SubsetTable] = None


def repetition_seeds(seed: int, rep: int) -> RepetitionSeeds:
    words = np.random.SeedSequence(entropy=seed, spawn_key=(rep,)).generate_state(4, dtype=np.uint64)
    return RepetitionSeeds(*(int(word) for word in words))


@contextmanager
def _stage(rep: int, stage: str) -> Iterator[None]:
    """Tag module errors raised inside with the repetition and stage"""
    try:
        yield
    except ShapleyForestError as e:
        e.with_context(rep=rep, stage=stage)
        raise


def load_dataset(config: RunConfig, data_seed: int) -> Dataset:
    source = config.source
    if source.generator is not None:
        return dataset_service.generate(source.generator.with_seed(data_seed))
    try:
        schema = parse_schema(source.columns)
    except ValueError as e:
        raise ConfigError(f"invalid column schema: {e}")
    return dataset_service.load_csv(source.path, schema, source.target)


def forest_params_for(config: RunConfig, dataset: Dataset, forest_seed: int):
    """Configured forest parameters with the repetition seed and experiment overrides"""
    update: Dict[str, Any] = {"seed": forest_seed}
    generator = config.source.generator
    if generator is not None and generator.experiment == Experiment.EXP1B:
        update["mtry"] = dataset.p
    return config.forest.model_copy(update=update)


def prepare_repetition(config: RunConfig, rep: int, timings: Dict[str, float]) -> Repetition:
    seeds = repetition_seeds(config.seed, rep)
    with _stage(rep, "data"):
        dataset = load_dataset(config, seeds.data)
    start = time.perf_counter()
    with _stage(rep, "fit"):
        if config.source.forest_path is not None:
            forest = load_forest(config.source.forest_path)
            forest_service.check_compatible(forest, dataset)
        else:
            forest = forest_service.fit(dataset, forest_params_for(config, dataset, seeds.forest), n_jobs=config.n_jobs)
    timings["fit"] += time.perf_counter() - start
    return Repetition(rep, seeds, dataset, forest, ValueCache(enabled=config.use_cache))


def draw_subsets(repetition: Repetition, sampler: Sampler, K: int) -> SubsetDraw:
    if sampler == Sampler.PIS:
        if repetition.table is None:
            repetition.table = extract_path_subsets(repetition.forest)
        return draw_importance(repetition.table, K, repetition.seeds.sampler)
    return draw_monte_carlo(repetition.forest.p, K, repetition.seeds.sampler)


def estimate_once(
    config: RunConfig,
    repetition: Repetition,
    sampler: Sampler,
    strategy: Strategy,
    K: int,
    timings: Dict[str, float],
) -> Tuple[ShapleyEstimate, Dict[str, Any], Dict[VarSubset, ValueEstimate]]:
    """One draw, its value estimates and the constrained solve for a prepared repetition"""
    rep = repetition.index
    start = time.perf_counter()
    with _stage(rep, "subsets"):
        draw = draw_subsets(repetition, sampler, K)
    timings["subsets"] += time.perf_counter() - start

    start = time.perf_counter()
    with _stage(rep, "values"):
        spec = EstimatorSpec(
            strategy=strategy,
            forest=repetition.forest,
            dataset=repetition.dataset,
            seed=repetition.seeds.values,
            marginal_draws=config.marginal_draws,
            n_jobs=config.n_jobs,
        )
        full = VarSubset.full(repetition.dataset.p)
        values = values_of(spec, draw.unique_subsets() + [full], repetition.cache)
    timings["values"] += time.perf_counter() - start

    start = time.perf_counter()
    with _stage(rep, "solve"):
        system = assemble(draw, [values[subset].value for subset in draw.subsets()], values[full].value)
        estimate = solve(system, drop_unselected=True, strict=config.strict_solver)
    timings["solve"] += time.perf_counter() - start

    diagnostics = dict(estimate.diagnostics)
    diagnostics.update(
        sampler=draw.sampler,
        distinct_subsets=len(draw.unique_subsets()),
        floored_complements=draw.floored,
        full_value=values[full].value,
    )
    return estimate, diagnostics, values


def cumulative_error(effects: np.ndarray, truth: Optional[np.ndarray]) -> Optional[float]:
    if truth is None:
        return None
    return float(np.abs(np.asarray(effects) - truth).sum())


def summarize(effects: np.ndarray, truth: Optional[np.ndarray]) -> Summary:
    mean = effects.mean(axis=0)
    std = effects.std(axis=0, ddof=1) if len(effects) > 1 else np.zeros(effects.shape[1])
    return Summary(
        mean=mean.tolist(),
        std=std.tolist(),
        ground_truth=None if truth is None else truth.tolist(),
        cumulative_error=cumulative_error(mean, truth),
        ranking=(np.argsort(-mean, kind="stable") + 1).tolist(),
    )


def _ground_truth(config: RunConfig, p: int) -> Optional[np.ndarray]:
    generator = config.source.generator
    if generator is None:
        return None
    truth = ground_truth_for(generator)
    if truth is not None and len(truth) != p:
        raise ConfigError(f"ground truth has {len(truth)} entries for p={p}")
    return truth


def run_shapley(config: RunConfig) -> RunReport:
    """Fit, draw, estimate and solve config.repetitions times"""
    timings: Dict[str, float] = defaultdict(float)
    started = time.perf_counter()
    results: List[RepetitionResult] = []
    tables: Dict[int, SubsetTable] = {}
    value_estimates: Dict[int, Dict[VarSubset, ValueEstimate]] = {}
    dataset = None
    for rep in range(config.repetitions):
        repetition = prepare_repetition(config, rep, timings)
        dataset = repetition.dataset
        estimate, diagnostics, values = estimate_once(
            config, repetition, config.sampler, config.strategy, config.num_subsets, timings
        )
        value_estimates[rep] = values
        if repetition.table is not None:
            tables[rep] = repetition.table
        diagnostics["forest"] = forest_service.diagnostics(repetition.forest, dataset)
        diagnostics["cache"] = repetition.cache.stats()
        results.append(
            RepetitionResult(
                rep=rep,
                seed=repetition.seeds.forest,
                effects=estimate.effects.tolist(),
                constraint=estimate.constraint,
                diagnostics=diagnostics,
            )
        )
        logger.info(f"Repetition {rep + 1}/{config.repetitions}: sum of effects {estimate.constraint:.4f}")

    truth = _ground_truth(config, dataset.p)
    effects = np.array([result.effects for result in results])
    summary = summarize(effects, truth)
    timings["total"] = time.perf_counter() - started
    if summary.cumulative_error is not None:
        logger.info(f"Cumulative absolute error {summary.cumulative_error:.4f}")
    return RunReport(
        config=config,
        variables=list(dataset.names),
        repetitions=results,
        summary=summary,
        diagnostics={
            "n": dataset.n,
            "p": dataset.p,
            "box_violations": sum(len(result.diagnostics["box_violations"]) for result in results),
        },
        timings=dict(timings),
        subset_tables=tables,
        value_estimates=value_estimates,
    )


def run_ablation(config: RunConfig) -> AblationReport:
    """Every sampler x strategy pair on the same data and forest per repetition"""
    timings: Dict[str, float] = defaultdict(float)
    started = time.perf_counter()
    cells = [(sampler, strategy) for sampler in Sampler for strategy in Strategy]
    effects: Dict[Tuple[Sampler, Strategy], List[np.ndarray]] = {cell: [] for cell in cells}
    dataset = None
    for rep in range(config.repetitions):
        repetition = prepare_repetition(config, rep, timings)
        dataset = repetition.dataset
        for sampler, strategy in cells:
            estimate, _, _ = estimate_once(config, repetition, sampler, strategy, config.num_subsets, timings)
            effects[sampler, strategy].append(estimate.effects)
        logger.info(f"Ablation repetition {rep + 1}/{config.repetitions} done")

    truth = _ground_truth(config, dataset.p)
    report_cells = []
    for sampler, strategy in cells:
        matrix = np.array(effects[sampler, strategy])
        mean = matrix.mean(axis=0)
        report_cells.append(
            AblationCell(
                sampler=sampler,
                strategy=strategy,
                cumulative_error=cumulative_error(mean, truth),
                errors=[] if truth is None else [cumulative_error(row, truth) for row in matrix],
                mean=mean.tolist(),
            )
        )
    timings["total"] = time.perf_counter() - started
    return AblationReport(
        config=config,
        variables=list(dataset.names),
        ground_truth=None if truth is None else truth.tolist(),
        cells=report_cells,
        timings=dict(timings),
    )


def run_ksweep(config: RunConfig, k_list: Optional[List[int]] = None) -> KSweepReport:
    """
    Cumulative error for each K in an ascending list.

    Each repetition fits one forest and reuses it, with its value cache and
    sampler seed, across the whole list.
    """
    k_list = k_list or config.k_list
    if not k_list:
        raise ConfigError("K sweep needs a non-empty list of subset counts")
    if any(b <= a for a, b in zip(k_list, k_list[1:])):
        raise ConfigError("K list must be strictly ascending", {"k_list": list(k_list)})
    if config.source.generator is None:
        raise ConfigError("K sweep needs a generated experiment with ground truth")

    timings: Dict[str, float] = defaultdict(float)
    started = time.perf_counter()
    errors: Dict[int, List[float]] = {K: [] for K in k_list}
    truth = None
    for rep in range(config.repetitions):
        repetition = prepare_repetition(config, rep, timings)
        if truth is None:
            truth = _ground_truth(config, repetition.dataset.p)
            if truth is None:
                raise ConfigError(f"no ground truth for {config.source.generator.experiment.value}")
        for K in k_list:
            estimate, _, _ = estimate_once(config, repetition, config.sampler, config.strategy, K, timings)
            errors[K].append(cumulative_error(estimate.effects, truth))

    rows = []
    for K in k_list:
        values = np.array(errors[K])
        spread = values.std(ddof=1) / np.sqrt(len(values)) if len(values) > 1 else 0.0
        rows.append(KSweepRow(num_subsets=K, mean_error=float(values.mean()), std_error=float(spread), errors=values.tolist()))
    means = [row.mean_error for row in rows]
    spearman = None
    if len(rows) > 1:
        rho = stats.spearmanr(k_list, means)[0]
        spearman = None if np.isnan(rho) else float(rho)
    timings["total"] = time.perf_counter() - started
    return KSweepReport(
        config=config,
        rows=rows,
        spearman=spearman,
        adjacent_decreases=sum(1 for a, b in zip(means, means[1:]) if b < a),
        timings=dict(timings),
    )
