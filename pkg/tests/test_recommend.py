import numpy as np
import pytest

from isaac.core import (
    AnnotationRecord,
    AnnotationSchema,
    Dimension,
    Group,
    Kind,
    RatedBook,
    Source,
)
from isaac.predict import ModelKind, ModelSpec, fit_ridge
from isaac.recommend import (
    AlreadyRated,
    CandidateBook,
    CurationMask,
    NoModel,
    RecommendMode,
    SchemaVersionMismatch,
    exploration_rank,
    explain,
    rank_candidates,
)

RIDGE_ONLY = dict(model_specs=(ModelSpec.ridge(1.0),),
                  grids={ModelKind.RIDGE: [ModelSpec.ridge(1.0)]})


def small_schema():
    dims = (
        Dimension("gr_avg_rating", "avg rating", Group.METADATA, Kind.STARS,
                  Source.GOODREADS_META),
        Dimension("rare", "rare attribute", Group.THEME, Kind.BINARY,
                  Source.BACKEND_SUMMARY),
        Dimension("common", "common attribute", Group.THEME, Kind.BINARY,
                  Source.BACKEND_SUMMARY),
        Dimension("driver", "taste driver", Group.THEME, Kind.BINARY,
                  Source.BACKEND_SUMMARY),
    )
    return AnnotationSchema(dimensions=dims)


def build_corpus(n=24, seed=0):
    rng = np.random.default_rng(seed)
    schema = small_schema()
    books, records = [], []
    for i in range(n):
        driver = float(i % 2)
        rare = 1.0 if i < 2 else 0.0
        values = {
            "gr_avg_rating": float(np.round(2.0 + 2.5 * rng.random(), 2)),
            "rare": rare,
            "common": float(rng.integers(0, 2)),
            "driver": driver,
        }
        raw = 30 + 50 * driver + rng.normal(0, 6)
        book = RatedBook.create(f"Book {i:02d}", "Corpus Author", raw,
                                percentile=None)
        books.append(book)
        records.append(AnnotationRecord(book_id=book.book_id, values=values))
    from isaac.ingest import apply_percentiles
    return apply_percentiles(books), records, schema


def candidate(title, values, schema, author="Cand Author", version=None):
    book = RatedBook.create(title, author, 0.0)
    return CandidateBook(
        book_id=book.book_id, title=title, author=author,
        record=AnnotationRecord(book_id=book.book_id, values=values,
                                schema_version=version or schema.version))


class TestRankCandidates:
    def test_clone_of_top_book_ranks_first(self):
        books, records, schema = build_corpus()
        top = max(books, key=lambda b: b.percentile)
        top_record = next(r for r in records if r.book_id == top.book_id)
        clone = candidate("A Clone", dict(top_record.values), schema)
        dull = candidate("B Dull", {"gr_avg_rating": 2.0, "rare": 0.0,
                                    "common": 0.0, "driver": 0.0}, schema)
        result = rank_candidates([dull, clone], books, records, schema,
                                 k=2, **RIDGE_ONLY)
        assert result.recommendations[0].title == "A Clone"
        assert [r.rank for r in result.recommendations] == [1, 2]

    def test_already_rated_rejected(self):
        books, records, schema = build_corpus()
        dupe = CandidateBook(book_id=books[0].book_id, title=books[0].title,
                             author=books[0].author, record=records[0])
        with pytest.raises(AlreadyRated):
            rank_candidates([dupe], books, records, schema, **RIDGE_ONLY)

    def test_schema_version_mismatch(self):
        books, records, schema = build_corpus()
        stale = candidate("Old Annotation", {"driver": 1.0}, schema, version=99)
        with pytest.raises(SchemaVersionMismatch):
            rank_candidates([stale], books, records, schema, **RIDGE_ONLY)

    def test_no_rated_books(self):
        _, _, schema = build_corpus()
        with pytest.raises(NoModel):
            rank_candidates([], [], [], schema, **RIDGE_ONLY)

    def test_ties_break_by_title(self):
        books, records, schema = build_corpus()
        values = {"gr_avg_rating": 3.0, "rare": 0.0, "common": 1.0, "driver": 1.0}
        twin_b = candidate("Beta Twin", dict(values), schema)
        twin_a = candidate("Alpha Twin", dict(values), schema)
        result = rank_candidates([twin_b, twin_a], books, records, schema,
                                 k=2, **RIDGE_ONLY)
        assert [r.title for r in result.recommendations] == ["Alpha Twin", "Beta Twin"]

    def test_rank_invariance_under_monotone_transform(self):
        books, records, schema = build_corpus()
        rng = np.random.default_rng(5)
        cands = [candidate(f"Cand {i}", {
            "gr_avg_rating": float(2 + 3 * rng.random()),
            "rare": float(rng.integers(0, 2)),
            "common": float(rng.integers(0, 2)),
            "driver": float(rng.integers(0, 2)),
        }, schema) for i in range(6)]
        result = rank_candidates(cands, books, records, schema, k=6, **RIDGE_ONLY)
        scores = [r.predicted for r in result.recommendations]
        transformed = [np.exp(3 * s) + 1 for s in scores]
        assert transformed == sorted(transformed, reverse=True)

    def test_mask_soundness(self):
        books, records, schema = build_corpus()
        mask = CurationMask(excluded=frozenset({"driver"}))
        cand = candidate("Probe", {"gr_avg_rating": 3.0, "rare": 1.0,
                                   "common": 1.0, "driver": 1.0}, schema)
        result = rank_candidates([cand], books, records, schema, mask,
                                 k=1, **RIDGE_ONLY)
        assert "driver" not in result.fitted_feature_ids
        assert result.excluded_dimensions == ("driver",)
        for rec in result.recommendations:
            assert all(dim != "driver" for dim, _ in rec.explanation)

    def test_masking_informative_dimension_hurts_loocv(self):
        books, records, schema = build_corpus()
        unmasked = rank_candidates([], books, records, schema, **RIDGE_ONLY)
        masked = rank_candidates([], books, records, schema,
                                 CurationMask(excluded=frozenset({"driver"})),
                                 **RIDGE_ONLY)
        assert masked.loocv_by_kind["ridge"] < unmasked.loocv_by_kind["ridge"]

    def test_metadata_names_model_pairing(self):
        books, records, schema = build_corpus()
        result = rank_candidates([], books, records, schema, **RIDGE_ONLY)
        assert result.ranked_by == "ridge"
        assert result.explained_by == "ridge"
        payload = result.to_dict()
        assert payload["model"]["excluded_dimensions"] == []


class TestExplain:
    def fit(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(30, 2))
        y = X[:, 0] * 0.5 + rng.normal(0, 0.1, 30)
        return fit_ridge(X, y, lam=1.0), X

    def test_row_at_feature_means_contributes_nothing(self):
        model, X = self.fit()
        mean_row = X.mean(axis=0)
        contributions = explain(model, mean_row)
        assert all(abs(c) < 1e-9 for _, c in contributions)
        assert model.predict(mean_row.reshape(1, -1))[0] == pytest.approx(
            model.intercept, abs=1e-9)

    def test_single_standardized_contribution(self):
        model, X = self.fit()
        model.coef = np.array([0.1, 0.0])
        row = X.mean(axis=0) + np.array([2.0, 0.0]) * np.array(
            [model.feat_sd[0], 0.0])
        contributions = explain(model, row)
        assert contributions[0][0] == "x0"
        assert contributions[0][1] == pytest.approx(0.2, abs=1e-9)

    def test_top_five_by_magnitude_with_signs(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(40, 8))
        beta = np.array([0.5, -0.4, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0])
        y = X @ beta + rng.normal(0, 0.05, 40)
        model = fit_ridge(X, y, lam=0.1)
        row = X.mean(axis=0) + model.feat_sd * np.array([1, -1, 1, 0, 0, 0, 0, 0.0])
        contributions = explain(model, row)
        assert len(contributions) == 5
        names = [d for d, _ in contributions[:3]]
        assert set(names) == {"x0", "x1", "x2"}
        signs = {d: np.sign(c) for d, c in contributions[:3]}
        assert signs["x0"] > 0 and signs["x1"] > 0  # -coef times -1 sd


class TestExplorationRank:
    def test_rare_dimension_candidate_ranks_higher(self):
        books, records, schema = build_corpus()
        hits_rare = candidate("Rare Hitter", {"gr_avg_rating": 3.0, "rare": 1.0,
                                              "common": 1.0, "driver": 1.0}, schema)
        plain = candidate("Common Only", {"gr_avg_rating": 3.0, "rare": 0.0,
                                          "common": 1.0, "driver": 1.0}, schema)
        result = exploration_rank([plain, hits_rare], books, records, schema,
                                  k=2, **RIDGE_ONLY)
        assert result.recommendations[0].title == "Rare Hitter"
        assert result.recommendations[0].mode is RecommendMode.EXPLORATION

    def test_duplicates_tie_by_title(self):
        books, records, schema = build_corpus()
        values = {"gr_avg_rating": 3.0, "rare": 1.0, "common": 0.0, "driver": 1.0}
        b = candidate("Zeta Copy", dict(values), schema)
        a = candidate("Alpha Copy", dict(values), schema)
        result = exploration_rank([b, a], books, records, schema, k=2, **RIDGE_ONLY)
        assert [r.title for r in result.recommendations] == ["Alpha Copy", "Zeta Copy"]
        assert result.recommendations[0].informativeness == pytest.approx(
            result.recommendations[1].informativeness)

    def test_empty_candidates(self):
        books, records, schema = build_corpus()
        result = exploration_rank([], books, records, schema, **RIDGE_ONLY)
        assert result.recommendations == []

    def test_informativeness_never_negative(self):
        books, records, schema = build_corpus()
        rng = np.random.default_rng(9)
        cands = [candidate(f"C{i}", {
            "gr_avg_rating": float(2 + 3 * rng.random()),
            "rare": float(rng.integers(0, 2)),
            "common": float(rng.integers(0, 2)),
            "driver": float(rng.integers(0, 2)),
        }, schema) for i in range(8)]
        result = exploration_rank(cands, books, records, schema, k=8, **RIDGE_ONLY)
        for rec in result.recommendations:
            assert rec.informativeness >= -1e-6
