import numpy as np
import pytest

from synthdata import dominant_feature_corpus, planted_corpus
from isaac.core import FeatureMatrix
from isaac.predict import (
    AVG_RATING_COLUMN,
    MissingColumn,
    ModelSpec,
    SingularSystem,
    SizeOutOfRange,
    TooFewBooks,
    WrongModelKind,
    default_grid,
    fit_baseline,
    fit_random_forest,
    fit_ridge,
    importance_ranking,
    learning_curve,
    loocv,
)

def simple_matrix(X, y, cols=None, weights=None):
    X = np.asarray(X, dtype=float)
    return FeatureMatrix(
        rows=tuple(f"b{i}" for i in range(X.shape[0])),
        cols=tuple(cols or (f"x{j}" for j in range(X.shape[1]))),
        data=X, mask=np.zeros_like(X, dtype=bool),
        outcome=np.asarray(y, dtype=float),
        weights=np.ones(X.shape[0]) if weights is None else np.asarray(weights, float),
    )


def normal_equations_oracle(X, y, w=None):
    """Independent least-squares route: raw normal equations on [1, X]."""
    X = np.asarray(X, dtype=float)
    design = np.hstack([np.ones((X.shape[0], 1)), X])
    W = np.diag(np.ones(len(y)) if w is None else np.asarray(w, float))
    beta = np.linalg.solve(design.T @ W @ design, design.T @ W @ np.asarray(y, float))
    return design @ beta


class TestRidge:
    def test_lambda_zero_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(0)
        for trial in range(10):
            n, p = rng.integers(6, 15), rng.integers(1, 4)
            X = rng.normal(size=(n, p))
            y = rng.normal(size=n)
            model = fit_ridge(X, y, lam=0.0)
            expected = normal_equations_oracle(X, y)
            assert np.allclose(model.predict(X), expected, atol=1e-8), trial

    def test_weighted_lambda_zero_matches_oracle(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(12, 3))
        y = rng.normal(size=12)
        w = rng.uniform(0.2, 1.0, size=12)
        model = fit_ridge(X, y, weights=w, lam=0.0)
        assert np.allclose(model.predict(X), normal_equations_oracle(X, y, w), atol=1e-8)

    def test_huge_lambda_collapses_slopes(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(20, 5))
        y = rng.normal(size=20)
        model = fit_ridge(X, y, lam=1e9)
        assert np.all(np.abs(model.coef) < 1e-6)
        assert np.allclose(model.predict(X), y.mean(), atol=1e-6)

    def test_duplicated_column_symmetric_coefficients(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=15)
        X = np.column_stack([x, x, rng.normal(size=15)])
        y = rng.normal(size=15)
        model = fit_ridge(X, y, lam=0.5)
        assert model.coef[0] == pytest.approx(model.coef[1], abs=1e-8)

    def test_collinear_at_lambda_zero_raises(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=10)
        X = np.column_stack([x, 2 * x])
        with pytest.raises(SingularSystem):
            fit_ridge(X, rng.normal(size=10), lam=0.0)

    def test_affine_rescaling_invariance(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(25, 4))
        y = rng.normal(size=25)
        base = fit_ridge(X, y, lam=2.0).predict(X)
        X2 = X.copy()
        X2[:, 1] = 37.5 * X2[:, 1] - 120.0
        again = fit_ridge(X2, y, lam=2.0).predict(X2)
        assert np.allclose(base, again, atol=1e-8)

    def test_uniform_constant_weights_change_nothing(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(18, 3))
        y = rng.normal(size=18)
        a = fit_ridge(X, y, lam=1.0).predict(X)
        b = fit_ridge(X, y, weights=np.full(18, 7.3), lam=1.0).predict(X)
        assert np.allclose(a, b, atol=1e-10)

    def test_missing_cells_imputed_with_train_mean(self):
        X = np.array([[1.0], [2.0], [3.0], [np.nan]])
        y = np.array([1.0, 2.0, 3.0, 2.0])
        model = fit_ridge(X, y, lam=1e9)
        # imputed cell contributes the column mean, so prediction is y mean
        assert model.predict(np.array([[np.nan]]))[0] == pytest.approx(y.mean(), abs=1e-6)


class TestForest:
    def test_constant_outcome_predicts_constant(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(30, 4))
        y = np.full(30, 0.7)
        model = fit_random_forest(X, y, spec=ModelSpec.forest(n_trees=20, seed=0))
        assert np.allclose(model.predict(X), 0.7)

    def test_step_function_loocv(self):
        rng = np.random.default_rng(42)
        step = rng.binomial(1, 0.5, size=50).astype(float)
        noise = rng.normal(size=(50, 3))
        X = np.column_stack([step, noise])
        y = step.copy()
        matrix = simple_matrix(X, y)
        spec = ModelSpec.forest(n_trees=60, seed=0)
        report = loocv(matrix, spec, grid=[spec])
        assert report.loocv_pearson >= 0.95

    def test_dominant_feature_ranked_first(self):
        for seed in (0, 1, 2):
            corpus = dominant_feature_corpus(seed=seed)
            model = fit_random_forest(corpus, spec=ModelSpec.forest(n_trees=80, seed=seed))
            assert model.ranked_importance()[0][0] == "dominant"

    def test_importance_nonnegative_sums_to_one(self):
        corpus = dominant_feature_corpus(seed=3)
        model = fit_random_forest(corpus, spec=ModelSpec.forest(n_trees=40, seed=3))
        assert np.all(model.importance >= 0)
        assert model.importance.sum() == pytest.approx(1.0)

    def test_all_noise_importance_spread(self):
        # With no signal, no feature should dominate: share < 3x uniform in
        # at least 90% of seeds.
        p = 15
        ok = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(60, p))
            y = rng.normal(size=60)
            model = fit_random_forest(X, y, spec=ModelSpec.forest(n_trees=40, seed=seed))
            ok += model.ranked_importance()[0][1] < 3.0 / p
        assert ok >= 18

    def test_deterministic_given_seed(self):
        corpus = dominant_feature_corpus(seed=5)
        a = fit_random_forest(corpus, spec=ModelSpec.forest(n_trees=30, seed=9))
        b = fit_random_forest(corpus, spec=ModelSpec.forest(n_trees=30, seed=9))
        assert np.array_equal(a.importance, b.importance)
        assert np.array_equal(a.predict(corpus.data), b.predict(corpus.data))

    def test_parallel_matches_serial(self):
        corpus = dominant_feature_corpus(seed=6)
        spec = ModelSpec.forest(n_trees=24, seed=4)
        serial = fit_random_forest(corpus, spec=spec, n_jobs=1)
        parallel = fit_random_forest(corpus, spec=spec, n_jobs=4)
        assert np.array_equal(serial.importance, parallel.importance)
        assert np.array_equal(serial.predict(corpus.data), parallel.predict(corpus.data))

    def test_uniform_constant_weights_change_nothing(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(40, 5))
        y = rng.normal(size=40)
        spec = ModelSpec.forest(n_trees=20, seed=2)
        a = fit_random_forest(X, y, spec=spec)
        b = fit_random_forest(X, y, weights=np.full(40, 0.013), spec=spec)
        assert np.allclose(a.predict(X), b.predict(X), atol=1e-10)
        assert np.allclose(a.importance, b.importance, atol=1e-10)

    def test_mtry_bounds_validated(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(20, 3))
        with pytest.raises(ValueError):
            fit_random_forest(X, rng.normal(size=20),
                              spec=ModelSpec.forest(mtry=10, seed=0))


class TestBaseline:
    def test_perfect_linear_relationship(self):
        rng = np.random.default_rng(0)
        avg = rng.uniform(1, 5, size=40)
        y = 0.2 * avg + 0.1
        matrix = simple_matrix(np.column_stack([avg, rng.normal(size=40)]), y,
                               cols=(AVG_RATING_COLUMN, "other"))
        report = loocv(matrix, ModelSpec.baseline())
        assert report.loocv_pearson >= 0.999

    def test_constant_column_reported_undefined(self):
        matrix = simple_matrix(np.column_stack([np.full(10, 4.0)]),
                               np.linspace(0, 1, 10), cols=(AVG_RATING_COLUMN,))
        report = loocv(matrix, ModelSpec.baseline())
        assert report.loocv_pearson is None
        assert "zero variance" in report.undefined_reason

    def test_missing_column(self):
        matrix = simple_matrix(np.random.default_rng(0).normal(size=(10, 2)),
                               np.linspace(0, 1, 10), cols=("a", "b"))
        with pytest.raises(MissingColumn):
            fit_baseline(matrix)


class TestLoocv:
    def test_too_few_books(self):
        matrix = simple_matrix(np.eye(4), np.arange(4.0))
        with pytest.raises(TooFewBooks):
            loocv(matrix, ModelSpec.ridge())

    def test_constant_outcome_flagged_not_nan(self):
        rng = np.random.default_rng(1)
        matrix = simple_matrix(rng.normal(size=(10, 2)), np.full(10, 0.5))
        report = loocv(matrix, ModelSpec.ridge(), grid=[ModelSpec.ridge(1.0)])
        assert report.loocv_pearson is None
        assert report.undefined_reason is not None

    def test_no_leakage_sentinel(self):
        # The held-out row carries an extreme value; if its statistics leaked
        # into the training fold, the prediction would shift detectably.
        X = np.array([[1e6], [1.0], [2.0], [3.0], [4.0], [5.0]])
        y = np.array([0.9, 0.1, 0.2, 0.3, 0.4, 0.5])
        matrix = simple_matrix(X, y)
        spec = ModelSpec.ridge(1.0)
        report = loocv(matrix, spec, grid=[spec])
        train_only = fit_ridge(X[1:], y[1:], lam=1.0)
        assert report.predictions[0][2] == pytest.approx(
            train_only.predict(X[:1])[0], abs=1e-12)

    def test_chosen_hyperparameters_recorded(self):
        matrix = planted_corpus(n=30, seed=1)
        report = loocv(matrix, ModelSpec.ridge(),
                       grid=[ModelSpec.ridge(lam) for lam in (0.1, 10.0)])
        assert len(report.chosen) == 30
        assert all(set(c) == {"lambda"} for c in report.chosen)

    def test_planted_corpus_thresholds(self):
        matrix = planted_corpus()
        ridge_r = loocv(matrix, ModelSpec.ridge(), seed=0).loocv_pearson
        baseline_r = loocv(matrix, ModelSpec.baseline(), seed=0).loocv_pearson
        assert ridge_r >= 0.6
        assert ridge_r - baseline_r >= 0.15

    def test_report_round_trips_to_json(self, tmp_path):
        matrix = simple_matrix(np.random.default_rng(2).normal(size=(8, 2)),
                               np.linspace(0.1, 0.9, 8))
        report = loocv(matrix, ModelSpec.ridge(), grid=[ModelSpec.ridge(1.0)])
        import json
        payload = json.loads(report.to_json())
        assert payload["model"] == "ridge"
        assert len(payload["predictions"]) == 8


class TestLearningCurve:
    def test_single_full_size_equals_plain_loocv(self):
        matrix = planted_corpus(n=40, seed=3)
        grid = [ModelSpec.ridge(1.0)]
        rows = learning_curve(matrix, ModelSpec.ridge(), [40], repeats=3,
                              seed=0, grid=grid)
        plain = loocv(matrix, ModelSpec.ridge(), grid=grid)
        assert rows[0]["mean_r"] == pytest.approx(plain.loocv_pearson)
        assert rows[0]["sd_r"] == pytest.approx(0.0)

    def test_fixed_seed_reproducible(self):
        matrix = planted_corpus(n=40, seed=3)
        grid = [ModelSpec.ridge(1.0)]
        a = learning_curve(matrix, ModelSpec.ridge(), [20], repeats=1, seed=5, grid=grid)
        b = learning_curve(matrix, ModelSpec.ridge(), [20], repeats=1, seed=5, grid=grid)
        assert a == b

    def test_size_out_of_range(self):
        matrix = planted_corpus(n=30, seed=4)
        with pytest.raises(SizeOutOfRange):
            learning_curve(matrix, ModelSpec.ridge(), [5])
        with pytest.raises(SizeOutOfRange):
            learning_curve(matrix, ModelSpec.ridge(), [31])


class TestImportanceRanking:
    def test_wrong_model_kind(self):
        matrix = simple_matrix(np.random.default_rng(3).normal(size=(10, 2)),
                               np.linspace(0, 1, 10))
        report = loocv(matrix, ModelSpec.ridge(), grid=[ModelSpec.ridge(1.0)])
        with pytest.raises(WrongModelKind):
            importance_ranking(report)

    def test_k_larger_than_p_returns_full_list(self):
        corpus = dominant_feature_corpus(n=40, p_noise=4, seed=7)
        spec = ModelSpec.forest(n_trees=30, seed=7)
        report = loocv(corpus, spec, grid=[spec])
        ranked = importance_ranking(report, k=50)
        assert len(ranked) == 5  # p columns, no padding


class TestDefaultGrid:
    def test_ridge_grid(self):
        grid = default_grid(ModelSpec.ridge(), p=10)
        assert [g.ridge_lambda for g in grid] == [0.01, 0.1, 1.0, 10.0, 100.0]

    def test_forest_grid(self):
        grid = default_grid(ModelSpec.forest(seed=5), p=40)
        combos = {(g.mtry, g.min_leaf) for g in grid}
        assert combos == {(14, 3), (14, 5), (7, 3), (7, 5)}
        assert all(g.seed == 5 for g in grid)
