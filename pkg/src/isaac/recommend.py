"""Candidate ranking with explanations, the curation mask, and the
most-informative-book exploration mode."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import (
    AnnotationRecord,
    AnnotationSchema,
    EncodeOptions,
    FeatureMatrix,
    RatedBook,
    encode_matrix,
)
from .predict import ModelKind, ModelSpec, RidgeModel, fit_model, fit_ridge, loocv
from .stats import effect_estimate

#: ci80 width of the pure prior; used for dimensions that are inestimable
#: before a candidate is added.
PRIOR_CI_WIDTH = 0.8


class NoModel(ValueError):
    """No rated books to fit a model on."""


class SchemaVersionMismatch(ValueError):
    """Candidates were annotated under a different schema version."""


class AlreadyRated(ValueError):
    """A candidate is already in the rated set."""


class RecommendMode(str, Enum):
    ENJOYMENT = "enjoyment"
    EXPLORATION = "exploration"


@dataclass(frozen=True)
class CurationMask:
    excluded: frozenset[str]
    created_at: str = ""
    reasons: Mapping[str, str] = field(default_factory=dict)

    def validate_against(self, schema: AnnotationSchema) -> None:
        unknown = [d for d in self.excluded if d not in schema]
        if unknown:
            raise KeyError(f"mask excludes unknown dimensions: {sorted(unknown)}")

    def to_dict(self) -> dict:
        return {
            "excluded": sorted(self.excluded),
            "created_at": self.created_at,
            "reasons": dict(sorted(self.reasons.items())),
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "CurationMask":
        return cls(excluded=frozenset(payload.get("excluded", ())),
                   created_at=payload.get("created_at", ""),
                   reasons=dict(payload.get("reasons", {})))


EMPTY_MASK = CurationMask(excluded=frozenset())


@dataclass(frozen=True)
class CandidateBook:
    book_id: str
    title: str
    author: str
    record: AnnotationRecord


@dataclass(frozen=True)
class Recommendation:
    book_id: str
    title: str
    predicted: float
    rank: int
    explanation: tuple[tuple[str, float], ...]
    mode: RecommendMode
    informativeness: float | None = None

    def to_dict(self) -> dict:
        return {
            "book_id": self.book_id,
            "title": self.title,
            "predicted_percentile": self.predicted,
            "rank": self.rank,
            "explanation": [{"dimension_id": d, "contribution": c}
                            for d, c in self.explanation],
            "mode": self.mode.value,
            "informativeness": self.informativeness,
        }


@dataclass
class RecommendationSet:
    recommendations: list[Recommendation]
    mode: RecommendMode
    ranked_by: str                       # model kind that produced the scores
    explained_by: str                    # always the ridge model
    loocv_by_kind: dict[str, float | None]
    excluded_dimensions: tuple[str, ...]
    fitted_feature_ids: tuple[str, ...]  # instrumentation: columns seen by fits

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "recommendations": [r.to_dict() for r in self.recommendations],
            "model": {
                "ranked_by": self.ranked_by,
                "explained_by": self.explained_by,
                "loocv_pearson": self.loocv_by_kind,
                "excluded_dimensions": list(self.excluded_dimensions),
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _candidate_design(candidates: Sequence[CandidateBook],
                      cols: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    X = np.zeros((len(candidates), len(cols)))
    mask = np.zeros_like(X, dtype=bool)
    for i, cand in enumerate(candidates):
        for j, dim_id in enumerate(cols):
            value = cand.record.values.get(dim_id)
            if value is None:
                mask[i, j] = True
            else:
                X[i, j] = float(value)
    return X, mask


def _check_candidates(candidates: Sequence[CandidateBook],
                      books: Sequence[RatedBook],
                      schema: AnnotationSchema) -> None:
    rated_ids = {b.book_id for b in books}
    for cand in candidates:
        if cand.book_id in rated_ids:
            raise AlreadyRated(f"{cand.title!r} is already rated")
        if cand.record.schema_version != schema.version:
            raise SchemaVersionMismatch(
                f"{cand.title!r} annotated under schema v{cand.record.schema_version}, "
                f"project is v{schema.version}")


def _select_and_fit(matrix: FeatureMatrix, model_specs: Sequence[ModelSpec],
                    grids: Mapping[ModelKind, Sequence[ModelSpec]] | None,
                    inner_folds: int, seed: int):
    """LOOCV every candidate family, fit the winner and the ridge explainer."""
    loocv_by_kind: dict[str, float | None] = {}
    best_spec, best_r = None, -np.inf
    for spec in model_specs:
        grid = (grids or {}).get(spec.kind)
        report = loocv(matrix, spec, grid=grid, inner_folds=inner_folds, seed=seed)
        loocv_by_kind[spec.kind.value] = report.loocv_pearson
        r = report.loocv_pearson if report.loocv_pearson is not None else -np.inf
        if r > best_r:
            best_spec, best_r = spec, r
    assert best_spec is not None
    ranker = fit_model(best_spec, matrix)
    if isinstance(ranker, RidgeModel):
        explainer = ranker
    else:
        explainer = fit_ridge(matrix, lam=1.0)
    return ranker, explainer, best_spec, loocv_by_kind


DEFAULT_MODEL_SPECS = (ModelSpec.ridge(), ModelSpec.forest())


def explain(model: RidgeModel, features: np.ndarray,
            mask: np.ndarray | None = None, top: int = 5) -> list[tuple[str, float]]:
    """Signed per-dimension contributions: coefficient times standardized value."""
    row = np.asarray(features, dtype=float).reshape(1, -1)
    mask_row = None if mask is None else np.asarray(mask, dtype=bool).reshape(1, -1)
    z = model.standardized(row, mask_row)[0]
    contributions = model.coef * z
    order = np.argsort(-np.abs(contributions), kind="stable")[:top]
    return [(model.feature_ids[j], float(contributions[j])) for j in order]


def rank_candidates(candidates: Sequence[CandidateBook],
                    books: Sequence[RatedBook],
                    records: Sequence[AnnotationRecord],
                    schema: AnnotationSchema,
                    mask: CurationMask = EMPTY_MASK,
                    k: int = 5, *,
                    model_specs: Sequence[ModelSpec] = DEFAULT_MODEL_SPECS,
                    grids: Mapping[ModelKind, Sequence[ModelSpec]] | None = None,
                    inner_folds: int = 5,
                    seed: int = 0) -> RecommendationSet:
    """Rank unread candidates by predicted enjoyment.

    The best-LOOCV model among the given families scores the candidates;
    explanations always come from the ridge model. Masked dimensions are
    dropped before any model sees the data. Ties break by title.
    """
    if not books:
        raise NoModel("no rated books to fit a model on")
    mask.validate_against(schema)
    _check_candidates(candidates, books, schema)

    matrix = encode_matrix(books, records, schema,
                           EncodeOptions(exclude=mask.excluded))
    ranker, explainer, best_spec, loocv_by_kind = _select_and_fit(
        matrix, model_specs, grids, inner_folds, seed)

    Xc, mc = _candidate_design(candidates, matrix.cols)
    scores = ranker.predict(Xc, mc) if candidates else np.zeros(0)

    order = sorted(range(len(candidates)),
                   key=lambda i: (-scores[i], candidates[i].title.lower()))
    recommendations = [
        Recommendation(
            book_id=candidates[i].book_id,
            title=candidates[i].title,
            predicted=float(scores[i]),
            rank=rank,
            explanation=tuple(explain(explainer, Xc[i], mc[i])),
            mode=RecommendMode.ENJOYMENT,
        )
        for rank, i in enumerate(order[:k], start=1)
    ]
    return RecommendationSet(
        recommendations=recommendations,
        mode=RecommendMode.ENJOYMENT,
        ranked_by=best_spec.kind.value,
        explained_by=ModelKind.RIDGE.value,
        loocv_by_kind=loocv_by_kind,
        excluded_dimensions=tuple(sorted(mask.excluded)),
        fitted_feature_ids=tuple(matrix.cols),
    )


def _ci_widths(data: np.ndarray, mask: np.ndarray, outcome: np.ndarray,
               cols: Sequence[str], grid_size: int) -> np.ndarray:
    widths = np.zeros(len(cols))
    for j in range(len(cols)):
        x = data[:, j].copy()
        x[mask[:, j]] = np.nan
        est = effect_estimate(x, outcome, grid_size=grid_size, dimension_id=cols[j])
        widths[j] = est.ci_width if est.ci_width is not None else PRIOR_CI_WIDTH
    return widths


def exploration_rank(candidates: Sequence[CandidateBook],
                     books: Sequence[RatedBook],
                     records: Sequence[AnnotationRecord],
                     schema: AnnotationSchema,
                     mask: CurationMask = EMPTY_MASK,
                     k: int = 5, *,
                     model_specs: Sequence[ModelSpec] = DEFAULT_MODEL_SPECS,
                     grids: Mapping[ModelKind, Sequence[ModelSpec]] | None = None,
                     inner_folds: int = 5,
                     seed: int = 0,
                     grid_size: int = 501) -> RecommendationSet:
    """Rank candidates by how much reading them would tighten the effect
    estimates: each candidate is provisionally added with its predicted
    enjoyment as the outcome, and informativeness is the total shrink in
    per-dimension ci80 widths. Dimensions inestimable before count at the
    pure-prior width, so books that touch barely-read dimensions score high."""
    if not books:
        raise NoModel("no rated books to fit a model on")
    mask.validate_against(schema)
    _check_candidates(candidates, books, schema)

    matrix = encode_matrix(books, records, schema,
                           EncodeOptions(exclude=mask.excluded))
    ranker, explainer, best_spec, loocv_by_kind = _select_and_fit(
        matrix, model_specs, grids, inner_folds, seed)

    Xc, mc = _candidate_design(candidates, matrix.cols)
    preds = ranker.predict(Xc, mc) if candidates else np.zeros(0)
    widths_before = _ci_widths(matrix.data, matrix.mask, matrix.outcome,
                               matrix.cols, grid_size)

    info = np.zeros(len(candidates))
    for i in range(len(candidates)):
        data_aug = np.vstack([matrix.data, Xc[i:i + 1]])
        mask_aug = np.vstack([matrix.mask, mc[i:i + 1]])
        outcome_aug = np.append(matrix.outcome, preds[i])
        widths_after = _ci_widths(data_aug, mask_aug, outcome_aug,
                                  matrix.cols, grid_size)
        info[i] = float(np.sum(widths_before - widths_after))

    order = sorted(range(len(candidates)),
                   key=lambda i: (-info[i], candidates[i].title.lower()))
    recommendations = [
        Recommendation(
            book_id=candidates[i].book_id,
            title=candidates[i].title,
            predicted=float(preds[i]),
            rank=rank,
            explanation=tuple(explain(explainer, Xc[i], mc[i])),
            mode=RecommendMode.EXPLORATION,
            informativeness=float(info[i]),
        )
        for rank, i in enumerate(order[:k], start=1)
    ]
    return RecommendationSet(
        recommendations=recommendations,
        mode=RecommendMode.EXPLORATION,
        ranked_by=best_spec.kind.value,
        explained_by=ModelKind.RIDGE.value,
        loocv_by_kind=loocv_by_kind,
        excluded_dimensions=tuple(sorted(mask.excluded)),
        fitted_feature_ids=tuple(matrix.cols),
    )


def write_recommendations(recs: RecommendationSet, path: str | Path) -> None:
    Path(path).write_text(recs.to_json() + "\n", encoding="utf-8")
