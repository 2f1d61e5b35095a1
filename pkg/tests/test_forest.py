import math

import numpy as np
import pytest

from shapley_forest.core.exceptions import EstimationError, ForestError
from shapley_forest.crud.forests import load_forest, save_forest
from shapley_forest.models.dataset import Dataset
from shapley_forest.models.forest import LEAF, OobAccumulator, sequential_mean
from shapley_forest.schemas.forest import ForestParams, Resampling
from shapley_forest.schemas.generator import ColumnKind
from shapley_forest.services import forest as forest_service
from shapley_forest.services.tree_builder import best_split, grow_tree


def _assert_same_forest(first, second):
    assert first.num_trees == second.num_trees
    for a, b in zip(first.trees, second.trees):
        for name in ("feature", "threshold", "left", "right", "value", "n_node", "depth", "inbag"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_best_split_simple():
    """Test a clean step is split at the midpoint"""
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    assert best_split(X, y, np.array([0]), min_child=1) == (0, 2.5)


def test_best_split_constant_output():
    """Test a node with constant output is never split"""
    X = np.arange(10.0)[:, None]
    assert best_split(X, np.ones(10), np.array([0]), min_child=1) is None


def test_best_split_respects_min_child():
    """Test cuts leaving a small child are not admissible"""
    X = np.arange(6.0)[:, None]
    y = np.array([10.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    j, t = best_split(X, y, np.array([0]), min_child=2)
    assert j == 0 and t >= 1.5


def test_best_split_tie_goes_to_lowest_variable():
    """Test identical candidate columns resolve to the lowest index"""
    column = np.array([1.0, 2.0, 3.0, 4.0])
    X = np.stack([column, column], axis=1)
    y = np.array([0.0, 0.0, 1.0, 1.0])
    assert best_split(X, y, np.array([0, 1]), min_child=1)[0] == 0


def test_best_split_ignores_tied_values():
    """Test no cut falls between equal feature values"""
    X = np.array([[1.0], [1.0], [1.0], [1.0]])
    y = np.array([0.0, 1.0, 0.0, 1.0])
    assert best_split(X, y, np.array([0]), min_child=1) is None


def test_fit_is_deterministic(make_dataset):
    """Test the same params and seed grow identical forests"""
    dataset = make_dataset(seed=1)
    params = ForestParams(num_trees=5, min_node_size=3, seed=42)
    _assert_same_forest(forest_service.fit(dataset, params, n_jobs=1), forest_service.fit(dataset, params, n_jobs=1))


def test_fit_independent_of_workers(make_dataset):
    """Test the worker count does not change the forest"""
    dataset = make_dataset(seed=2)
    params = ForestParams(num_trees=4, min_node_size=3, seed=5)
    _assert_same_forest(forest_service.fit(dataset, params, n_jobs=1), forest_service.fit(dataset, params, n_jobs=2))


def test_leaves_hold_min_node_size(make_dataset):
    """Test every leaf keeps at least min_node_size in-bag slots"""
    forest = forest_service.fit(make_dataset(seed=3), ForestParams(num_trees=5, min_node_size=7, seed=0), n_jobs=1)
    for tree in forest.trees:
        assert (tree.n_node[tree.is_leaf] >= 7).all()
        assert tree.n_node[0] == len(tree.inbag)


def test_children_numbered_after_parents(make_dataset):
    """Test breadth-first numbering"""
    forest = forest_service.fit(make_dataset(seed=3), ForestParams(num_trees=3, min_node_size=3, seed=0), n_jobs=1)
    for tree in forest.trees:
        internal = np.flatnonzero(tree.feature != LEAF)
        assert (tree.left[internal] > internal).all()
        assert (tree.right[internal] > internal).all()


def test_leaf_values_are_slot_means(make_dataset):
    """Test each leaf value is the mean of the in-bag outputs reaching it"""
    dataset = make_dataset(seed=4)
    params = ForestParams(num_trees=1, min_node_size=4, seed=1).resolve(dataset.n, dataset.p)
    tree = grow_tree(dataset.features, dataset.output, params, 0)
    leaves = tree.apply(dataset.features[tree.inbag])
    for leaf in np.flatnonzero(tree.is_leaf):
        assert tree.value[leaf] == sequential_mean(dataset.output[tree.inbag][leaves == leaf])


def test_predict_averages_trees(exp2_forest, exp2_dataset):
    """Test forest predictions are the mean of tree predictions"""
    x = exp2_dataset.features[0]
    expected = np.mean([tree.predict(x[None, :])[0] for tree in exp2_forest.trees])
    assert forest_service.predict(exp2_forest, x) == pytest.approx(expected, abs=1e-12)


def test_predict_wrong_width(exp2_forest):
    """Test a query with the wrong dimension is refused"""
    with pytest.raises(ForestError):
        forest_service.predict(exp2_forest, np.zeros(3))


def test_oob_rows_are_complement_of_inbag(exp2_forest):
    """Test OOB rows are exactly the rows absent from the resample"""
    rows = exp2_forest.oob_rows(0)
    assert not set(rows.tolist()) & set(exp2_forest.trees[0].inbag.tolist())
    assert len(rows) + len(set(exp2_forest.trees[0].inbag.tolist())) == exp2_forest.n


def test_oob_explained_variance_bounded(exp2_forest, exp2_dataset):
    """Test the OOB explained variance is a fraction below one"""
    value = forest_service.oob_explained_variance(exp2_forest, exp2_dataset)
    assert value <= 1.0


def test_constant_output_rejected():
    """Test explained variance is undefined for a constant output"""
    dataset = Dataset(features=np.arange(20.0)[:, None], output=np.ones(20), columns=[ColumnKind.continuous()])
    forest = forest_service.fit(dataset, ForestParams(num_trees=2, min_node_size=2), n_jobs=1)
    assert forest.split_count() == 0
    with pytest.raises(EstimationError):
        forest_service.oob_explained_variance(forest, dataset)


def test_mtry_larger_than_p(make_dataset):
    """Test mtry above p is refused"""
    with pytest.raises(ForestError):
        forest_service.fit(make_dataset(p=3), ForestParams(num_trees=1, mtry=4))


def test_sample_too_small(make_dataset):
    """Test n below twice the minimum node size is refused"""
    with pytest.raises(ForestError):
        forest_service.fit(make_dataset(n=8), ForestParams(num_trees=1, min_node_size=5))


def test_theory_mode_subsamples(make_dataset):
    """Test theory mode draws 0.632 n distinct rows without replacement"""
    dataset = make_dataset(n=200)
    params = ForestParams.theory_mode(dataset.n, num_trees=3, min_node_size=5)
    forest = forest_service.fit(dataset, params, n_jobs=1)
    assert forest.params.resampling == Resampling.SUBSAMPLE
    for tree in forest.trees:
        assert len(tree.inbag) == 126
        assert len(np.unique(tree.inbag)) == 126


@pytest.mark.parametrize("n, expected", [(50, 31), (317, 200), (1000, 632)])
def test_theory_mode_single_tree_bookkeeping(make_dataset, n, expected):
    """Test one theory-mode tree keeps floor(0.632 n) rows and leaves out exactly the rest"""
    dataset = make_dataset(n=n)
    params = ForestParams.theory_mode(dataset.n, num_trees=1, min_node_size=5)
    forest = forest_service.fit(dataset, params, n_jobs=1)
    inbag = forest.trees[0].inbag
    oob = forest.oob_rows(0)
    assert len(inbag) == expected
    assert len(oob) == n - expected
    assert not np.intersect1d(inbag, oob).size
    np.testing.assert_array_equal(np.union1d(inbag, oob), np.arange(n))


def test_gamma_keeps_children_balanced(make_dataset):
    """Test every split leaves each child at least ceil(gamma * parent) slots"""
    params = ForestParams(num_trees=5, min_node_size=1, gamma=0.3, seed=4)
    forest = forest_service.fit(make_dataset(seed=4, n=200), params, n_jobs=1)
    for tree in forest.trees:
        internal = np.flatnonzero(tree.feature != LEAF)
        assert internal.size
        for node in internal:
            least = math.ceil(0.3 * tree.n_node[node])
            assert tree.n_node[tree.left[node]] >= least
            assert tree.n_node[tree.right[node]] >= least


def test_gamma_refuses_lopsided_cut():
    """Test gamma overrides the best cut when it would isolate one point"""
    X = np.arange(10.0)[:, None]
    y = np.zeros(10)
    y[0] = 10.0
    assert best_split(X, y, np.array([0]), min_child=1) == (0, 0.5)
    dataset = Dataset(features=X, output=y, columns=[ColumnKind.continuous()])
    params = ForestParams(num_trees=1, min_node_size=1, gamma=0.25, resampling=Resampling.SUBSAMPLE, subsample_size=10)
    tree = forest_service.fit(dataset, params, n_jobs=1).trees[0]
    assert tree.threshold[0] == 2.5


def test_delta_randomizes_root_variable():
    """Test delta draws a single candidate often enough to move the root off the strong variable"""
    rng = np.random.default_rng(8)
    X = rng.standard_normal((300, 4))
    y = 5 * X[:, 0] + 0.1 * rng.standard_normal(300)
    dataset = Dataset(features=X, output=y, columns=[ColumnKind.continuous()] * 4)

    greedy = forest_service.fit(dataset, ForestParams(num_trees=20, mtry=4, seed=8), n_jobs=1)
    assert {int(tree.feature[0]) for tree in greedy.trees} == {0}

    randomized = forest_service.fit(dataset, ForestParams(num_trees=20, mtry=4, delta=0.9, seed=8), n_jobs=1)
    assert len({int(tree.feature[0]) for tree in randomized.trees}) > 1


def test_step_root_threshold():
    """Test every root split of a step at 0.5 lands between 0.4 and 0.6"""
    rng = np.random.default_rng(9)
    X = rng.uniform(size=(200, 1))
    y = (X[:, 0] > 0.5).astype(float)
    dataset = Dataset(features=X, output=y, columns=[ColumnKind.continuous()])
    forest = forest_service.fit(dataset, ForestParams(num_trees=10, min_node_size=5, seed=9), n_jobs=1)
    for tree in forest.trees:
        assert tree.feature[0] == 0
        assert 0.4 < tree.threshold[0] < 0.6
    assert abs(forest_service.predict(forest, np.array([0.9])) - 1.0) <= 0.1


def test_max_depth_caps_trees(make_dataset):
    """Test no tree grows past max_depth"""
    forest = forest_service.fit(make_dataset(), ForestParams(num_trees=3, min_node_size=2, max_depth=2), n_jobs=1)
    assert max(tree.max_depth for tree in forest.trees) <= 2


def test_max_leaves_caps_trees(make_dataset):
    """Test no tree holds more than max_leaves leaves"""
    forest = forest_service.fit(make_dataset(), ForestParams(num_trees=3, min_node_size=2, max_leaves=4), n_jobs=1)
    assert max(tree.leaf_count for tree in forest.trees) <= 4


def test_save_load_round_trip(tmp_path, exp2_forest, exp2_dataset):
    """Test a saved forest predicts bit for bit like the original"""
    path = save_forest(exp2_forest, str(tmp_path / "forest.json"))
    loaded = load_forest(str(path))
    _assert_same_forest(exp2_forest, loaded)
    assert loaded.params == exp2_forest.params
    np.testing.assert_array_equal(
        forest_service.oob_predict(loaded, exp2_dataset), forest_service.oob_predict(exp2_forest, exp2_dataset)
    )


def test_load_rejects_other_documents(tmp_path):
    """Test a JSON file without the forest format tag is refused"""
    path = tmp_path / "other.json"
    path.write_text('{"format": "something-else"}')
    with pytest.raises(ForestError):
        load_forest(str(path))


def test_oob_accumulator_marks_uncovered():
    """Test rows never added stay NaN"""
    accumulator = OobAccumulator(3)
    accumulator.add(np.array([0, 2]), np.array([1.0, 3.0]))
    accumulator.add(np.array([0]), np.array([2.0]))
    result = accumulator.result()
    assert result[0] == 1.5 and result[2] == 3.0
    assert np.isnan(result[1])


def test_diagnostics_keys(exp2_forest, exp2_dataset):
    """Test forest diagnostics report coverage and size"""
    diagnostics = forest_service.diagnostics(exp2_forest, exp2_dataset)
    assert diagnostics["num_trees"] == 20
    assert diagnostics["total_nodes"] == exp2_forest.total_nodes()
    assert 0 <= diagnostics["oob_uncovered_rows"] <= exp2_dataset.n
