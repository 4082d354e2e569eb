import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metastep import _kernels
from metastep.extratrees import (
    TreeParams,
    fit_forest,
    load_forest,
    predict,
    predict_batch,
    save_forest,
)


def _random_data(n, d, seed=0):
    gen = np.random.default_rng(seed)
    X = gen.standard_normal((n, d))
    y = X[:, 0] + np.sin(X[:, min(1, d - 1)]) + 0.1 * gen.standard_normal(n)
    return X, y


class TestFitting:
    def test_constant_target_exact_everywhere(self):
        X, _ = _random_data(40, 3)
        y = np.full(40, 2.5)
        forest = fit_forest(X, y, TreeParams(n_trees=7), seed=0)
        queries = np.random.default_rng(1).standard_normal((20, 3)) * 5
        assert np.all(predict_batch(forest, queries) == 2.5)

    def test_single_row_memorized(self):
        forest = fit_forest(np.array([[1.0, 2.0]]), np.array([-3.0]),
                            TreeParams(n_trees=3), seed=0)
        assert predict(forest, np.array([9.0, 9.0])) == -3.0

    def test_fully_grown_zero_training_error(self):
        X, y = _random_data(50, 4, seed=2)
        forest = fit_forest(X, y, TreeParams(n_trees=10, min_split_fraction=0.01), seed=3)
        assert np.allclose(predict_batch(forest, X), y, atol=1e-12)

    def test_deterministic_under_fixed_seed(self):
        X, y = _random_data(80, 5, seed=4)
        params = TreeParams(n_trees=6, min_split_fraction=0.05)
        f1 = fit_forest(X, y, params, seed=11)
        f2 = fit_forest(X, y, params, seed=11)
        for name in ("features", "thresholds", "lefts", "rights", "values", "roots"):
            assert np.array_equal(getattr(f1, name), getattr(f2, name))
        f3 = fit_forest(X, y, params, seed=12)
        assert not np.array_equal(f1.thresholds, f3.thresholds)

    def test_predictions_bounded_by_target_range(self):
        X, y = _random_data(120, 3, seed=5)
        forest = fit_forest(X, y, TreeParams(n_trees=5, min_split_fraction=0.1), seed=6)
        queries = np.random.default_rng(7).standard_normal((300, 3)) * 10
        preds = predict_batch(forest, queries)
        assert np.all(preds >= y.min()) and np.all(preds <= y.max())

    def test_min_split_fraction_limits_leaf_growth(self):
        X, y = _random_data(100, 2, seed=8)
        shallow = fit_forest(X, y, TreeParams(n_trees=1, min_split_fraction=0.5), seed=0)
        deep = fit_forest(X, y, TreeParams(n_trees=1, min_split_fraction=0.01), seed=0)
        assert len(shallow.features) < len(deep.features)

    def test_k_features_restricts_candidates(self):
        # only feature 0 carries signal; k = 1 forests must sometimes be forced
        # to split on the uninformative feature, changing the fit
        gen = np.random.default_rng(9)
        X = gen.standard_normal((60, 2))
        y = 3.0 * X[:, 0]
        all_feats = fit_forest(X, y, TreeParams(n_trees=4), seed=1)
        assert np.allclose(predict_batch(all_feats, X), y, atol=1e-10)
        one_feat = fit_forest(X, y, TreeParams(n_trees=4, k_features=1), seed=1)
        assert one_feat.feature_dim == 2

    def test_invalid_inputs_rejected(self):
        with pytest.raises(ValueError):
            fit_forest(np.zeros((0, 2)), np.zeros(0), TreeParams(), seed=0)
        with pytest.raises(ValueError):
            fit_forest(np.array([[np.nan, 1.0]]), np.array([1.0]), TreeParams(), seed=0)
        with pytest.raises(ValueError):
            TreeParams(n_trees=0)
        with pytest.raises(ValueError):
            TreeParams(min_split_fraction=0.0)

    @given(st.integers(5, 40), st.integers(1, 4), st.integers(0, 100))
    @settings(max_examples=20, deadline=None)
    def test_prediction_within_target_hull_property(self, n, d, seed):
        gen = np.random.default_rng(seed)
        X = gen.standard_normal((n, d))
        y = gen.standard_normal(n)
        forest = fit_forest(X, y, TreeParams(n_trees=3), seed=seed)
        preds = predict_batch(forest, gen.standard_normal((25, d)))
        assert np.all(preds >= y.min() - 1e-12)
        assert np.all(preds <= y.max() + 1e-12)


class TestKernels:
    def test_split_gain_paths_agree(self):
        X, y = _random_data(200, 6, seed=10)
        feats = np.arange(6, dtype=np.int64)
        thrs = np.random.default_rng(11).uniform(-1, 1, 6)
        g_py = _kernels._py_split_gains(X, y, feats, thrs)
        if _kernels.USE_NUMBA:
            g_nb = _kernels._nb_split_gains(X, y, feats, thrs)
            assert np.allclose(g_py, g_nb, atol=1e-8)

    def test_gain_is_variance_reduction(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0.0, 0.0, 10.0, 10.0])
        gains = _kernels._py_split_gains(X, y, np.array([0]), np.array([1.5]))
        # perfect split removes the whole parent SSE: 4 * var = 100
        assert gains[0] == pytest.approx(100.0)

    def test_empty_side_gain_is_minus_inf(self):
        X = np.array([[0.0], [1.0]])
        y = np.array([0.0, 1.0])
        gains = _kernels._py_split_gains(X, y, np.array([0]), np.array([-5.0]))
        assert gains[0] == -np.inf

    def test_predict_paths_identical(self):
        X, y = _random_data(100, 4, seed=12)
        forest = fit_forest(X, y, TreeParams(n_trees=8), seed=13)
        flat = (forest.features, forest.thresholds, forest.lefts, forest.rights,
                forest.values, forest.roots)
        queries = np.random.default_rng(14).standard_normal((50, 4))
        p_py = _kernels._py_predict_forest(*flat, queries)
        if _kernels.USE_NUMBA:
            p_nb = _kernels._nb_predict_forest(*flat, queries)
            assert np.array_equal(p_py, p_nb)
        assert np.array_equal(predict_batch(forest, queries), p_py) or np.allclose(
            predict_batch(forest, queries), p_py
        )


class TestSerialization:
    def test_round_trip(self, tmp_path):
        X, y = _random_data(60, 3, seed=15)
        forest = fit_forest(X, y, TreeParams(n_trees=5), seed=16)
        path = tmp_path / "forest.npz"
        save_forest(forest, path)
        loaded = load_forest(path)
        queries = np.random.default_rng(17).standard_normal((30, 3))
        assert np.array_equal(predict_batch(forest, queries), predict_batch(loaded, queries))
        assert loaded.train_size == 60 and loaded.feature_dim == 3

    def test_version_mismatch_rejected(self, tmp_path):
        X, y = _random_data(10, 2, seed=18)
        forest = fit_forest(X, y, TreeParams(n_trees=2), seed=0)
        path = tmp_path / "forest.npz"
        save_forest(forest, path)
        data = dict(np.load(path))
        data["format_version"] = np.array([999])
        np.savez(path, **data)
        with pytest.raises(ValueError, match="version"):
            load_forest(path)

    def test_feature_dim_mismatch_rejected(self):
        X, y = _random_data(10, 2, seed=19)
        forest = fit_forest(X, y, TreeParams(n_trees=2), seed=0)
        with pytest.raises(ValueError):
            predict_batch(forest, np.zeros((3, 5)))
