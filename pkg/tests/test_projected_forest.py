import numpy as np
import pytest

from shapley_forest.core.exceptions import EstimationError
from shapley_forest.models.dataset import Dataset
from shapley_forest.models.forest import LEAF, Forest, Tree
from shapley_forest.models.projection import ProjectionQuery
from shapley_forest.models.subsets import VarSubset
from shapley_forest.schemas.forest import ForestParams
from shapley_forest.schemas.generator import ColumnKind
from shapley_forest.services import forest as forest_service
from shapley_forest.services.cell_refinement import project_tree
from shapley_forest.services.projected_forest import estimate_v, prf_oob_estimates, prf_predict_tree


@pytest.fixture
def four_point():
    """Root splits X1 at 0.5, both children split X2 at 0.5; Y = 1..4"""
    X = np.array([[0.2, 0.2], [0.2, 0.8], [0.8, 0.2], [0.8, 0.8]])
    y = np.array([1.0, 2.0, 3.0, 4.0])
    dataset = Dataset(features=X, output=y, columns=[ColumnKind.continuous()] * 2)
    tree = Tree(
        feature=np.array([0, 1, 1, LEAF, LEAF, LEAF, LEAF]),
        threshold=np.array([0.5, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0]),
        left=np.array([1, 3, 5, LEAF, LEAF, LEAF, LEAF]),
        right=np.array([2, 4, 6, LEAF, LEAF, LEAF, LEAF]),
        value=np.array([2.5, 1.5, 3.5, 1.0, 2.0, 3.0, 4.0]),
        n_node=np.array([4, 2, 2, 1, 1, 1, 1]),
        depth=np.array([0, 1, 1, 2, 2, 2, 2]),
        inbag=np.arange(4),
    )

    def _forest(min_node_size: int) -> Forest:
        params = ForestParams(num_trees=1, mtry=1, min_node_size=min_node_size)
        return Forest(trees=(tree,), params=params, n=4, p=2)

    return dataset, _forest


def _random_subsets(rng, p, count):
    masks = rng.integers(1, 2**p, size=count)
    return [VarSubset(int(mask), p) for mask in masks]


def test_hand_built_projection(four_point):
    """Test projecting on X2 averages the two cells with X2 <= 0.5"""
    dataset, make_forest = four_point
    query = ProjectionQuery(VarSubset.from_indices([1], 2), np.array([0.3]))
    result = prf_predict_tree(make_forest(1), 0, dataset, query)
    assert result.value == 2.0
    assert result.support == 2
    assert result.stop_level == 2


def test_hand_built_projection_batched(four_point):
    """Test the batched descent agrees on the hand-built tree"""
    dataset, make_forest = four_point
    forest = make_forest(1)
    predictions = project_tree(
        forest.trees[0], dataset.features, dataset.output, np.array([[0.0, 0.3], [0.0, 0.9]]),
        VarSubset.from_indices([1], 2), 1,
    )
    assert predictions.tolist() == [2.0, 3.0]


def test_projection_stops_before_small_cell(four_point):
    """Test descent halts at the level that would leave too few slots"""
    dataset, make_forest = four_point
    query = ProjectionQuery(VarSubset.from_indices([1], 2), np.array([0.3]))
    result = prf_predict_tree(make_forest(3), 0, dataset, query)
    assert result.value == 2.5
    assert result.support == 4
    assert result.stop_level == 1


def test_full_projection_is_tree_prediction(four_point):
    """Test projecting on every variable reproduces the leaf"""
    dataset, make_forest = four_point
    forest = make_forest(1)
    full = VarSubset.full(2)
    for x in dataset.features:
        result = prf_predict_tree(forest, 0, dataset, ProjectionQuery.from_point(full, x))
        assert result.value == forest.trees[0].predict(x[None, :])[0]
        assert result.support == 1


def test_out_of_subset_splits_ignored(make_dataset):
    """Test a tree that never splits on U predicts its in-bag mean"""
    dataset = make_dataset(seed=5, p=3)
    forest = forest_service.fit(dataset.select_columns([0, 1]), ForestParams(num_trees=2, min_node_size=3), n_jobs=1)
    widened = Forest(trees=forest.trees, params=forest.params, n=forest.n, p=3)
    query = ProjectionQuery(VarSubset.from_indices([2], 3), np.array([0.1]))
    for t, tree in enumerate(widened.trees):
        result = prf_predict_tree(widened, t, dataset, query)
        assert result.value == pytest.approx(dataset.output[tree.inbag].mean(), abs=1e-12)
        assert result.support == len(tree.inbag)


def test_query_must_match_subset():
    """Test a query with the wrong number of values is refused"""
    with pytest.raises(EstimationError):
        ProjectionQuery(VarSubset.from_indices([0, 1], 3), np.array([0.1]))
    with pytest.raises(EstimationError):
        ProjectionQuery(VarSubset(0, 3), np.array([]))


@pytest.mark.parametrize("seed", range(10))
def test_batched_matches_pointwise(make_dataset, seed):
    """Test the simultaneous descent equals pointwise replay exactly"""
    rng = np.random.default_rng(seed)
    dataset = make_dataset(seed=seed, n=50, p=4)
    forest = forest_service.fit(dataset, ForestParams(num_trees=3, min_node_size=2, seed=seed), n_jobs=1)
    for subset in _random_subsets(rng, 4, 10):
        for t, tree in enumerate(forest.trees):
            rows = forest.oob_rows(t)
            if not rows.size:
                continue
            batched = project_tree(
                tree, dataset.features, dataset.output, dataset.features[rows], subset, forest.params.min_node_size
            )
            pointwise = [
                prf_predict_tree(forest, t, dataset, ProjectionQuery.from_point(subset, dataset.features[i])).value
                for i in rows
            ]
            np.testing.assert_array_equal(batched, pointwise)


@pytest.mark.parametrize("seed", range(10))
def test_full_set_identity(make_dataset, seed):
    """Test the full projection equals the OOB forest prediction bit for bit"""
    dataset = make_dataset(seed=seed, n=80, p=3)
    forest = forest_service.fit(dataset, ForestParams(num_trees=4, min_node_size=1 + seed % 4, seed=seed), n_jobs=1)
    full = VarSubset.full(3)
    (projected,) = prf_oob_estimates(forest, dataset, [full], n_jobs=1)
    np.testing.assert_array_equal(projected, forest_service.oob_predict(forest, dataset))
    assert estimate_v(forest, dataset, full) == forest_service.oob_explained_variance(forest, dataset)


@pytest.mark.parametrize("seed", range(3))
def test_support_grows_as_descent_stops_earlier(make_dataset, seed):
    """Test raising min_node_size stops no deeper and keeps at least as many slots"""
    rng = np.random.default_rng(seed)
    dataset = make_dataset(seed=seed, n=120, p=4)
    forest = forest_service.fit(dataset, ForestParams(num_trees=2, min_node_size=1, seed=seed), n_jobs=1)
    for subset in _random_subsets(rng, 4, 5):
        query = ProjectionQuery.from_point(subset, dataset.features[int(rng.integers(dataset.n))])
        for t in range(forest.num_trees):
            results = []
            for min_size in (1, 2, 4, 8, 16):
                resized = Forest(
                    trees=forest.trees, params=forest.params.model_copy(update={"min_node_size": min_size}),
                    n=forest.n, p=forest.p,
                )
                result = prf_predict_tree(resized, t, dataset, query)
                assert result.support >= min_size
                results.append(result)
            for shallow, deep in zip(results[1:], results):
                assert shallow.stop_level <= deep.stop_level
                assert shallow.support >= deep.support


def test_stump_projections_nest(make_dataset):
    """Test on stumps a smaller subset keeps a superset of the larger subset's cell"""
    dataset = make_dataset(seed=6, n=100, p=3)
    forest = forest_service.fit(dataset, ForestParams(num_trees=6, mtry=3, max_depth=1, seed=6), n_jobs=1)
    chain = [VarSubset.from_indices(indices, 3) for indices in ([0], [0, 1], [0, 1, 2])]
    for x in dataset.features[:10]:
        for t in range(forest.num_trees):
            supports = [
                prf_predict_tree(forest, t, dataset, ProjectionQuery.from_point(subset, x)).support
                for subset in chain
            ]
            assert supports == sorted(supports, reverse=True)


def test_hand_built_projections_nest(four_point):
    """Test dropping X1 from the subset widens the cell around the same point"""
    dataset, make_forest = four_point
    forest = make_forest(1)
    x = np.array([0.2, 0.3])
    narrow = prf_predict_tree(forest, 0, dataset, ProjectionQuery.from_point(VarSubset.full(2), x))
    wide = prf_predict_tree(forest, 0, dataset, ProjectionQuery.from_point(VarSubset.from_indices([1], 2), x))
    assert (narrow.support, wide.support) == (1, 2)


def test_estimates_keep_subset_order(exp2_forest, exp2_dataset):
    """Test results come back in the order subsets were given"""
    subsets = [VarSubset.from_indices([2], 15), VarSubset.from_indices([0, 1], 15)]
    forward = prf_oob_estimates(exp2_forest, exp2_dataset, subsets, n_jobs=1)
    backward = prf_oob_estimates(exp2_forest, exp2_dataset, subsets[::-1], n_jobs=1)
    np.testing.assert_array_equal(forward[0], backward[1])
    np.testing.assert_array_equal(forward[1], backward[0])


def test_support_stays_above_min_node_size(exp2_forest, exp2_dataset):
    """Test projected cells never drop below min_node_size"""
    rng = np.random.default_rng(0)
    for subset in _random_subsets(rng, 15, 5):
        query = ProjectionQuery.from_point(subset, exp2_dataset.features[0])
        for t in range(3):
            result = prf_predict_tree(exp2_forest, t, exp2_dataset, query)
            assert result.support >= exp2_forest.params.min_node_size


def test_informative_subset_beats_noise(exp2_forest, exp2_dataset):
    """Test X3 alone explains more than a pure-noise input"""
    informative = estimate_v(exp2_forest, exp2_dataset, VarSubset.from_indices([2], 15))
    noise = estimate_v(exp2_forest, exp2_dataset, VarSubset.from_indices([12], 15))
    assert noise < informative <= 1.0
    assert noise < 0.1
