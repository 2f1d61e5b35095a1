import numpy as np
import pytest

from shapley_forest.models.dataset import Dataset
from shapley_forest.schemas.forest import ForestParams
from shapley_forest.schemas.generator import ColumnKind, Experiment, GeneratorParams, GeneratorSpec
from shapley_forest.services import forest as forest_service
from shapley_forest.services.datasets import generate


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def make_dataset():
    """Factory for small continuous datasets with interactions"""

    def _make(seed: int = 0, n: int = 120, p: int = 4) -> Dataset:
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, p))
        y = X[:, 0] + 0.5 * X[:, 1] * X[:, min(2, p - 1)] + 0.1 * rng.standard_normal(n)
        return Dataset(features=X, output=y, columns=[ColumnKind.continuous()] * p)

    return _make


@pytest.fixture(scope="session")
def exp2_dataset():
    return generate(GeneratorSpec(experiment=Experiment.EXP2, n=400, seed=7))


@pytest.fixture(scope="session")
def exp2_forest(exp2_dataset):
    return forest_service.fit(exp2_dataset, ForestParams(num_trees=20, min_node_size=5, seed=3), n_jobs=1)


@pytest.fixture
def custom_spec():
    """Four correlated Gaussian inputs, the last one with a zero coefficient"""
    return GeneratorSpec(
        experiment=Experiment.CUSTOM,
        n=300,
        seed=11,
        params=GeneratorParams(beta=[1.0, 0.5, 0.25, 0.0]),
    )
