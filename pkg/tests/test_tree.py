import numpy as np

from ensemble_reduction.tree import LEAF, build_tree


def test_single_split_on_step_function():
    X = np.array([[0.0, 5.0], [1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
    y = np.array([0.0, 0.0, 10.0, 10.0])
    tree, leaf_of = build_tree(X, y)
    assert tree.n_nodes == 3
    assert tree.feature[0] == 0
    assert tree.threshold[0] == 1.5
    assert np.array_equal(tree.predict(X), y)
    assert np.array_equal(tree.apply(X), leaf_of)


def test_constant_target_is_a_single_leaf():
    X = np.random.default_rng(0).normal(size=(10, 3))
    tree, leaf_of = build_tree(X, np.full(10, 2.5))
    assert tree.n_nodes == 1
    assert tree.feature[0] == LEAF
    assert tree.value[0] == 2.5
    assert (leaf_of == 0).all()


def test_max_depth_is_honoured():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(200, 4))
    y = rng.normal(size=200)
    tree, _ = build_tree(X, y, max_depth=3)
    assert tree.depth() <= 3
    assert tree.n_leaves <= 8


def test_full_depth_fits_training_data():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(60, 3))
    y = rng.normal(size=60)
    tree, _ = build_tree(X, y, max_depth=80)
    assert np.allclose(tree.predict(X), y)
    internal = tree.feature != LEAF
    assert np.all(tree.left[internal] != LEAF) and np.all(tree.right[internal] != LEAF)
    assert np.all((tree.feature[internal] >= 0) & (tree.feature[internal] < 3))


def test_min_samples_split_stops_growth():
    X = np.arange(6, dtype=float)[:, None]
    y = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    tree, _ = build_tree(X, y, min_samples_split=7)
    assert tree.n_nodes == 1
    assert tree.value[0] == 2.5


def test_duplicate_feature_values_never_split_apart():
    X = np.array([[1.0], [1.0], [2.0], [2.0]])
    y = np.array([0.0, 1.0, 5.0, 6.0])
    tree, leaf_of = build_tree(X, y)
    assert leaf_of[0] == leaf_of[1]
    assert leaf_of[2] == leaf_of[3]
    assert tree.n_leaves == 2


def test_custom_leaf_value():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0.0, 0.0, 10.0, 10.0])
    tree, _ = build_tree(X, y, leaf_value=lambda rows: float(len(rows)))
    assert set(tree.value[tree.feature == LEAF]) == {2.0}
