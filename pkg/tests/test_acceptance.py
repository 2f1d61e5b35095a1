"""Full-scale runs; enable with --runslow"""
import time

import numpy as np
import pytest

from shapley_forest.models.subsets import SubsetTable, VarSubset
from shapley_forest.schemas.forest import ForestParams
from shapley_forest.schemas.generator import Experiment, GeneratorSpec
from shapley_forest.schemas.run import DataSource, RunConfig, Sampler, Strategy
from shapley_forest.services import forest as forest_service
from shapley_forest.services.datasets import generate
from shapley_forest.services.ground_truth import exp2_model_for, numeric_v_star
from shapley_forest.services.harness import run_ablation, run_ksweep, run_shapley
from shapley_forest.services.projected_forest import estimate_v, prf_oob_estimates, values_from_predictions
from shapley_forest.services.shapley_solver import assemble, kernel_weight, shapley_exact, solve
from shapley_forest.services.subset_engine import draw_importance, draw_monte_carlo

pytestmark = pytest.mark.slow


def experiment_config(experiment, n, **kwargs):
    settings = {
        "source": DataSource(generator=GeneratorSpec(experiment=experiment, n=n)),
        "forest": ForestParams(num_trees=500, min_node_size=5),
        "num_subsets": 500,
        "repetitions": 10,
        "seed": 2024,
        "n_jobs": 4,
    }
    settings.update(kwargs)
    return RunConfig(**settings)


def test_exp2_reproduction():
    """Test exp2 at full scale stays within 0.25 and ranks X3 first"""
    report = run_shapley(experiment_config(Experiment.EXP2, 10_000))
    assert report.summary.cumulative_error <= 0.25
    assert report.summary.ranking[0] == 3


def test_exp1_ablation_direction():
    """Test path sampling with projection beats both ablated cells on exp1a"""
    ablation = run_ablation(
        experiment_config(Experiment.EXP1A, 3000, forest=ForestParams(num_trees=200, min_node_size=5))
    )
    errors = {(cell.sampler, cell.strategy): cell.cumulative_error for cell in ablation.cells}
    shapley = errors[Sampler.PIS, Strategy.PRF]
    assert shapley < errors[Sampler.PMC, Strategy.PRF]
    assert shapley < errors[Sampler.PIS, Strategy.MARGINAL]


def test_exp1_copies_and_dummies():
    """Test copies agree within two pooled deviations and dummies sit near zero"""
    report = run_shapley(experiment_config(Experiment.EXP1A, 3000))
    mean = np.array(report.summary.mean)
    std = np.array(report.summary.std)
    for copy in (11, 12):
        pooled = np.sqrt((std[1] ** 2 + std[copy] ** 2) / 2)
        assert abs(mean[1] - mean[copy]) <= 2 * pooled
    assert np.all(np.abs(mean[13:15]) <= 0.03)


def test_ksweep_trend():
    """Test K=10 is worse than K=500 by more than two standard errors"""
    sweep = run_ksweep(experiment_config(Experiment.EXP1A, 3000), [10, 500])
    small, large = sweep.rows
    assert small.mean_error - large.mean_error > 2 * np.hypot(small.std_error, large.std_error)


def test_consistency_trend():
    """Test the exp2 error shrinks from n=500 to n=4000"""
    errors = []
    for n in (500, 4000):
        config = experiment_config(
            Experiment.EXP2, n, forest=ForestParams(num_trees=200, min_node_size=5), num_subsets=300
        )
        errors.append(run_shapley(config).summary.cumulative_error)
    assert errors[1] < errors[0]


def test_prf_values_converge():
    """Test PRF values approach v* on random subsets as n grows"""
    rng = np.random.default_rng(0)
    subsets = [VarSubset(int(mask), 15) for mask in rng.integers(1, 2**15 - 1, size=20)]
    gaps = []
    for n in (500, 4000):
        spec = GeneratorSpec(experiment=Experiment.EXP2, n=n, seed=3)
        model = exp2_model_for(spec)
        per_rep = []
        for rep in range(10):
            dataset = generate(spec.with_seed(100 + rep))
            forest = forest_service.fit(dataset, ForestParams(num_trees=200, min_node_size=5, seed=rep), n_jobs=4)
            predictions = prf_oob_estimates(forest, dataset, subsets, n_jobs=4)
            values = [values_from_predictions(dataset, pred)[0] for pred in predictions]
            truth = [numeric_v_star(model, subset, seed=rep)[0] for subset in subsets]
            per_rep.append(np.mean(np.abs(np.array(values) - truth)))
        gaps.append(np.mean(per_rep))
    assert gaps[1] < gaps[0]


def test_exp3_null_categoricals():
    """Test the 10- and 100-level categorical inputs get near-zero effects"""
    report = run_shapley(experiment_config(Experiment.EXP3, 2000, repetitions=5))
    mean = np.array(report.summary.mean)
    assert abs(mean[4]) <= 0.05
    assert abs(mean[5]) <= 0.05
    assert abs(mean[0] - mean[1]) <= 0.1


def test_prf_runtime_scaling():
    """Test doubling n costs at most 2.6 times the projection time"""
    rng = np.random.default_rng(1)
    subsets = [VarSubset(int(mask), 15) for mask in rng.integers(1, 2**15 - 1, size=20)]
    durations = []
    for n in (10_000, 20_000):
        dataset = generate(GeneratorSpec(experiment=Experiment.EXP2, n=n, seed=5))
        forest = forest_service.fit(dataset, ForestParams(num_trees=20, min_node_size=5, seed=1), n_jobs=4)
        start = time.perf_counter()
        prf_oob_estimates(forest, dataset, subsets, n_jobs=1)
        durations.append(time.perf_counter() - start)
    assert durations[1] / durations[0] <= 2.6


@pytest.mark.parametrize("seed", range(1000))
def test_prf_identity(seed, make_dataset):
    """Test estimate_v on the full set equals the OOB explained variance"""
    rng = np.random.default_rng(seed)
    p = int(rng.integers(2, 6))
    dataset = make_dataset(seed=seed, n=int(rng.integers(40, 120)), p=p)
    params = ForestParams(num_trees=int(rng.integers(1, 6)), min_node_size=int(rng.integers(1, 6)), seed=seed)
    forest = forest_service.fit(dataset, params, n_jobs=1)
    full = VarSubset.full(p)
    (projected,) = prf_oob_estimates(forest, dataset, [full], n_jobs=1)
    np.testing.assert_array_equal(projected, forest_service.oob_predict(forest, dataset))
    if not np.isnan(projected).all():
        assert estimate_v(forest, dataset, full) == forest_service.oob_explained_variance(forest, dataset)


def test_sampling_nearly_unbiased():
    """Test reseeded pMC estimates average to the exact values"""
    rng = np.random.default_rng(7)
    values = rng.uniform(size=1 << 6)
    values[0] = 0.0
    oracle = lambda subset: float(values[subset.mask])  # noqa: E731
    exact = shapley_exact(oracle, 6)
    estimates = []
    for seed in range(500):
        draw = draw_monte_carlo(6, 64, seed=seed)
        system = assemble(draw, [oracle(subset) for subset in draw.subsets()], oracle(VarSubset.full(6)))
        estimates.append(solve(system).effects)
    estimates = np.array(estimates)
    stderr = estimates.std(axis=0, ddof=1) / np.sqrt(len(estimates))
    assert np.all(np.abs(estimates.mean(axis=0) - exact) <= 3 * stderr + 0.01)


def test_path_sampling_unbiased():
    """Test reseeded pIS estimates over a kernel-shaped table average to the exact values"""
    p = 6
    counts = {}
    for mask in range(1, (1 << p) - 1):
        subset = VarSubset(mask, p)
        # 72 w(U) is integral for p = 6: 12, 3, 2 by size
        counts[subset] = round(72 * kernel_weight(p, subset.size))
    table = SubsetTable(p=p, counts=counts)

    rng = np.random.default_rng(11)
    main = rng.uniform(size=p)
    interaction = rng.uniform(size=1 << p)
    values = np.array([main[VarSubset(mask, p).indicator() == 1].sum() for mask in range(1 << p)])
    values += 0.3 * interaction
    values[0] = 0.0
    oracle = lambda subset: float(values[subset.mask])  # noqa: E731
    exact = shapley_exact(oracle, p)

    estimates = []
    for seed in range(500):
        draw = draw_importance(table, 256, seed=seed)
        assert draw.floored == 0
        system = assemble(draw, [oracle(subset) for subset in draw.subsets()], oracle(VarSubset.full(p)))
        estimates.append(solve(system).effects)
    estimates = np.array(estimates)
    stderr = estimates.std(axis=0, ddof=1) / np.sqrt(len(estimates))
    assert np.all(np.abs(estimates.mean(axis=0) - exact) <= 3 * stderr)
