"""Out-of-sample enjoyment prediction: ridge regression, a from-scratch random
forest, the average-rating baseline, leave-one-out cross-validation with
nested hyperparameter selection, learning curves, and importance ranking."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import FeatureMatrix
from .stats import pearson

AVG_RATING_COLUMN = "gr_avg_rating"

# Default hyperparameter grids for nested CV.
RIDGE_LAMBDA_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
FOREST_MIN_LEAF_GRID = (3, 5)
DEFAULT_N_TREES = 300
INNER_FOLDS = 5
MISSING_INDICATOR_THRESHOLD = 0.05


class SingularSystem(np.linalg.LinAlgError):
    """Collinear columns at lambda=0; refit with lambda > 0."""


class MissingColumn(KeyError):
    """The matrix lacks the column this model requires."""


class TooFewBooks(ValueError):
    """Not enough books for the requested evaluation."""


class SizeOutOfRange(ValueError):
    """A learning-curve size falls outside [10, n]."""


class WrongModelKind(TypeError):
    """The operation applies to a different model kind."""


class ModelKind(str, Enum):
    RIDGE = "ridge"
    RANDOM_FOREST = "random_forest"
    BASELINE_AVG_RATING = "baseline_avg_rating"


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    ridge_lambda: float = 1.0
    n_trees: int = DEFAULT_N_TREES
    mtry: int | None = None  # None: ceil(p/3) at fit time
    min_leaf: int = 3
    max_depth: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.ridge_lambda < 0:
            raise ValueError("ridge lambda must be >= 0")
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")

    @classmethod
    def ridge(cls, lam: float = 1.0) -> "ModelSpec":
        return cls(kind=ModelKind.RIDGE, ridge_lambda=lam)

    @classmethod
    def forest(cls, n_trees: int = DEFAULT_N_TREES, mtry: int | None = None,
               min_leaf: int = 3, max_depth: int | None = None,
               seed: int = 0) -> "ModelSpec":
        return cls(kind=ModelKind.RANDOM_FOREST, n_trees=n_trees, mtry=mtry,
                   min_leaf=min_leaf, max_depth=max_depth, seed=seed)

    @classmethod
    def baseline(cls) -> "ModelSpec":
        return cls(kind=ModelKind.BASELINE_AVG_RATING)

    def hyperparameters(self) -> dict:
        if self.kind is ModelKind.RIDGE:
            return {"lambda": self.ridge_lambda}
        if self.kind is ModelKind.RANDOM_FOREST:
            return {"n_trees": self.n_trees, "mtry": self.mtry,
                    "min_leaf": self.min_leaf, "max_depth": self.max_depth,
                    "seed": self.seed}
        return {}


def default_grid(spec: ModelSpec, p: int) -> list[ModelSpec]:
    """The declared nested-CV grid for a model kind."""
    if spec.kind is ModelKind.RIDGE:
        return [replace(spec, ridge_lambda=lam) for lam in RIDGE_LAMBDA_GRID]
    if spec.kind is ModelKind.RANDOM_FOREST:
        mtries = sorted({max(1, math.ceil(p / 3)), max(1, math.ceil(math.sqrt(p)))})
        return [replace(spec, mtry=m, min_leaf=leaf)
                for m in mtries for leaf in FOREST_MIN_LEAF_GRID]
    return [spec]


def _as_design(matrix, outcome=None, weights=None, mask=None, cols=None):
    """Accept a FeatureMatrix or plain arrays (NaN = missing)."""
    if isinstance(matrix, FeatureMatrix):
        return (matrix.data, matrix.mask, matrix.outcome, matrix.weights,
                list(matrix.cols), list(matrix.rows))
    X = np.asarray(matrix, dtype=float)
    if mask is None:
        mask = np.isnan(X)
        X = np.where(mask, 0.0, X)
    y = np.asarray(outcome, dtype=float)
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=float)
    if cols is None:
        cols = [f"x{j}" for j in range(X.shape[1])]
    rows = [str(i) for i in range(X.shape[0])]
    return X, np.asarray(mask, dtype=bool), y, w, list(cols), rows


class Preprocessor:
    """Train-fold imputation and missingness indicators.

    Statistics come from the training rows only; columns missing in more than
    5% of training rows gain a companion was-missing indicator so the fact
    that a book was undocumented stays visible to the model.
    """

    def __init__(self, threshold: float = MISSING_INDICATOR_THRESHOLD):
        self.threshold = threshold
        self.col_means: np.ndarray | None = None
        self.indicator_cols: list[int] = []

    def fit(self, X: np.ndarray, mask: np.ndarray) -> "Preprocessor":
        n = X.shape[0]
        means = np.zeros(X.shape[1])
        for j in range(X.shape[1]):
            present = ~mask[:, j]
            means[j] = X[present, j].mean() if present.any() else 0.0
        self.col_means = means
        frac = mask.mean(axis=0) if n else np.zeros(X.shape[1])
        self.indicator_cols = [j for j in range(X.shape[1]) if frac[j] > self.threshold]
        return self

    def transform(self, X: np.ndarray, mask: np.ndarray) -> np.ndarray:
        out = np.where(mask, self.col_means[None, :], X)
        if self.indicator_cols:
            ind = mask[:, self.indicator_cols].astype(float)
            out = np.hstack([out, ind])
        return out

    def feature_ids(self, cols: Sequence[str]) -> list[str]:
        return list(cols) + [f"{cols[j]}__missing" for j in self.indicator_cols]


def _normalize_weights(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise ValueError("sample weights must be positive")
    if np.all(w == w[0]):
        return np.ones(len(w))  # uniform weights are exactly a no-op
    return w / w.mean()


@dataclass
class RidgeModel:
    spec: ModelSpec
    pre: Preprocessor
    feature_ids: list[str]
    coef: np.ndarray          # on the standardized feature scale
    intercept: float
    feat_mean: np.ndarray
    feat_sd: np.ndarray

    def standardized(self, X: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
        if mask is None:
            mask = np.isnan(X)
            X = np.where(mask, 0.0, X)
        Z = self.pre.transform(X, mask)
        return (Z - self.feat_mean[None, :]) / self.feat_sd[None, :]

    def predict(self, X: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
        return self.standardized(X, mask) @ self.coef + self.intercept


def fit_ridge(matrix, outcome=None, weights=None, lam: float = 1.0,
              mask=None, cols=None) -> RidgeModel:
    """Weighted ridge with an unpenalized intercept, solved in closed form.

    Features are imputed and standardized with statistics from the rows given
    here, so calling this on a training fold cannot leak held-out books.
    Weights are normalized to mean 1 so a constant rescaling changes nothing.
    """
    X, mask, y, w, cols, _ = _as_design(matrix, outcome, weights, mask, cols)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    w = _normalize_weights(w)
    pre = Preprocessor().fit(X, mask)
    Z = pre.transform(X, mask)

    wsum = w.sum()
    feat_mean = (w @ Z) / wsum
    centered = Z - feat_mean[None, :]
    feat_var = (w @ centered ** 2) / wsum
    feat_sd = np.sqrt(feat_var)
    feat_sd[feat_sd == 0.0] = 1.0
    Zs = centered / feat_sd[None, :]

    y_mean = float(w @ y / wsum)
    yc = y - y_mean

    A = Zs.T @ (Zs * w[:, None])
    if lam == 0.0:
        if np.linalg.matrix_rank(Zs * np.sqrt(w)[:, None]) < Zs.shape[1]:
            raise SingularSystem("collinear columns at lambda=0; use lambda > 0")
    A[np.diag_indices_from(A)] += lam
    coef = np.linalg.solve(A, Zs.T @ (w * yc))
    return RidgeModel(
        spec=ModelSpec.ridge(lam), pre=pre, feature_ids=pre.feature_ids(cols),
        coef=coef, intercept=y_mean, feat_mean=feat_mean, feat_sd=feat_sd,
    )


# Flat tree storage: feature < 0 marks a leaf whose prediction is `value`.
@dataclass
class _Tree:
    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)

    def add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def predict_one(self, x: np.ndarray) -> float:
        node = 0
        while self.feature[node] >= 0:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] \
                else self.right[node]
        return self.value[node]


def _grow_tree(Z: np.ndarray, y: np.ndarray, w: np.ndarray, idx: np.ndarray,
               rng: np.random.Generator, mtry: int, min_leaf: int,
               max_depth: int | None, tree: _Tree, importance: np.ndarray,
               depth: int = 0) -> int:
    node = tree.add_node()
    yv, wv = y[idx], w[idx]
    wsum = wv.sum()
    mean = float(wv @ yv / wsum)
    tree.value[node] = mean
    sse_parent = float(wv @ (yv - mean) ** 2)

    n_node = idx.size
    lo, hi = min_leaf - 1, n_node - min_leaf - 1
    if (n_node < 2 * min_leaf or hi < lo or sse_parent <= 1e-12
            or (max_depth is not None and depth >= max_depth)):
        return node

    # Evaluate every candidate split of every drawn feature in one batch:
    # column-wise sort, weighted prefix sums, then the pooled child SSE.
    feats = rng.choice(Z.shape[1], size=min(mtry, Z.shape[1]), replace=False)
    sub = Z[np.ix_(idx, feats)]
    order = np.argsort(sub, axis=0, kind="stable")
    vs = np.take_along_axis(sub, order, axis=0)
    ys = yv[order]
    ws = wv[order]
    cw = np.cumsum(ws, axis=0)
    cwy = np.cumsum(ws * ys, axis=0)
    cwy2 = np.cumsum(ws * ys * ys, axis=0)

    wl, wyl, wy2l = cw[lo:hi + 1], cwy[lo:hi + 1], cwy2[lo:hi + 1]
    wr, wyr, wy2r = cw[-1] - wl, cwy[-1] - wyl, cwy2[-1] - wy2l
    with np.errstate(divide="ignore", invalid="ignore"):
        sse = (wy2l - wyl ** 2 / wl) + (wy2r - wyr ** 2 / np.maximum(wr, 1e-300))
    sse = np.where(vs[lo:hi + 1] < vs[lo + 1:hi + 2], sse, np.inf)

    flat = int(np.argmin(sse))
    row, col = divmod(flat, sse.shape[1])
    if not np.isfinite(sse[row, col]):
        return node
    gain = sse_parent - float(sse[row, col])
    if gain <= 1e-12:
        return node

    f = int(feats[col])
    cut = lo + row
    importance[f] += gain
    tree.feature[node] = f
    tree.threshold[node] = float((vs[cut, col] + vs[cut + 1, col]) / 2.0)
    tree.left[node] = _grow_tree(Z, y, w, idx[order[:cut + 1, col]], rng, mtry,
                                 min_leaf, max_depth, tree, importance, depth + 1)
    tree.right[node] = _grow_tree(Z, y, w, idx[order[cut + 1:, col]], rng, mtry,
                                  min_leaf, max_depth, tree, importance, depth + 1)
    return node


@dataclass
class ForestModel:
    spec: ModelSpec
    pre: Preprocessor
    feature_ids: list[str]
    trees: list[_Tree]
    importance: np.ndarray  # normalized, sums to 1

    def predict(self, X: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
        if mask is None:
            mask = np.isnan(X)
            X = np.where(mask, 0.0, X)
        Z = self.pre.transform(X, mask)
        preds = np.zeros(Z.shape[0])
        for i in range(Z.shape[0]):
            preds[i] = sum(t.predict_one(Z[i]) for t in self.trees) / len(self.trees)
        return preds

    def ranked_importance(self) -> list[tuple[str, float]]:
        order = np.argsort(-self.importance, kind="stable")
        return [(self.feature_ids[j], float(self.importance[j])) for j in order]


def fit_random_forest(matrix, outcome=None, weights=None,
                      spec: ModelSpec | None = None, mask=None, cols=None,
                      n_jobs: int = 1) -> ForestModel:
    """Bagged CART regression trees with weighted variance-reduction splits.

    Each tree draws its own RNG from a spawned seed sequence, so training is
    deterministic given (data, spec, seed) and identical whether trees are
    built serially or in parallel. Importance accumulates each feature's total
    weighted variance reduction over all splits, normalized to sum 1.
    """
    spec = spec or ModelSpec.forest()
    if spec.kind is not ModelKind.RANDOM_FOREST:
        raise WrongModelKind(f"expected random_forest spec, got {spec.kind.value}")
    X, mask, y, w, cols, _ = _as_design(matrix, outcome, weights, mask, cols)
    w = _normalize_weights(w)
    pre = Preprocessor().fit(X, mask)
    Z = pre.transform(X, mask)
    n, p = Z.shape
    mtry = spec.mtry if spec.mtry is not None else max(1, math.ceil(p / 3))
    if not 1 <= mtry <= p:
        raise ValueError(f"mtry must be in [1, {p}], got {mtry}")

    seeds = np.random.SeedSequence(spec.seed).spawn(spec.n_trees)

    def build(child_seed) -> tuple[_Tree, np.ndarray]:
        rng = np.random.default_rng(child_seed)
        idx = rng.choice(n, size=n, replace=True)
        tree = _Tree()
        imp = np.zeros(p)
        _grow_tree(Z, y, w, idx, rng, mtry, spec.min_leaf, spec.max_depth, tree, imp)
        return tree, imp

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            built = list(pool.map(build, seeds))
    else:
        built = [build(s) for s in seeds]

    trees = [t for t, _ in built]
    importance = np.sum([imp for _, imp in built], axis=0)
    total = importance.sum()
    importance = importance / total if total > 0 else np.full(p, 1.0 / p)
    return ForestModel(spec=spec, pre=pre, feature_ids=pre.feature_ids(cols),
                       trees=trees, importance=importance)


@dataclass
class BaselineModel:
    spec: ModelSpec
    feature_ids: list[str]
    col: int
    col_mean: float
    slope: float
    intercept: float
    constant_predictor: bool

    def predict(self, X: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
        if mask is None:
            mask = np.isnan(X)
            X = np.where(mask, 0.0, X)
        x = np.where(mask[:, self.col], self.col_mean, X[:, self.col])
        return self.intercept + self.slope * x


def fit_baseline(matrix, outcome=None, weights=None, mask=None, cols=None,
                 column: str = AVG_RATING_COLUMN) -> BaselineModel:
    """Simple weighted linear regression on the average public rating only."""
    X, mask, y, w, cols, _ = _as_design(matrix, outcome, weights, mask, cols)
    if column not in cols:
        raise MissingColumn(f"matrix has no {column!r} column")
    j = cols.index(column)
    w = _normalize_weights(w)
    present = ~mask[:, j]
    col_mean = X[present, j].mean() if present.any() else 0.0
    x = np.where(mask[:, j], col_mean, X[:, j])

    wsum = w.sum()
    x_mean = float(w @ x / wsum)
    y_mean = float(w @ y / wsum)
    sxx = float(w @ (x - x_mean) ** 2)
    if sxx == 0.0:
        return BaselineModel(spec=ModelSpec.baseline(), feature_ids=[column],
                             col=j, col_mean=col_mean, slope=0.0,
                             intercept=y_mean, constant_predictor=True)
    slope = float(w @ ((x - x_mean) * (y - y_mean))) / sxx
    return BaselineModel(spec=ModelSpec.baseline(), feature_ids=[column],
                         col=j, col_mean=col_mean, slope=slope,
                         intercept=y_mean - slope * x_mean,
                         constant_predictor=False)


def fit_model(spec: ModelSpec, matrix, outcome=None, weights=None, mask=None,
              cols=None):
    if spec.kind is ModelKind.RIDGE:
        return fit_ridge(matrix, outcome, weights, spec.ridge_lambda, mask, cols)
    if spec.kind is ModelKind.RANDOM_FOREST:
        return fit_random_forest(matrix, outcome, weights, spec, mask, cols)
    return fit_baseline(matrix, outcome, weights, mask, cols)


def _stratified_folds(y: np.ndarray, k: int, seed: int,
                      n_strata: int = 5) -> list[np.ndarray]:
    """Deterministic k folds stratified by outcome quintile."""
    n = len(y)
    k = min(k, n)
    rng = np.random.default_rng(seed)
    order = np.argsort(y, kind="stable")
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for stratum in np.array_split(order, n_strata):
        stratum = stratum.copy()
        rng.shuffle(stratum)
        for i, row in enumerate(stratum):
            folds[(offset + i) % k].append(int(row))
        offset += len(stratum)
    return [np.asarray(sorted(f), dtype=int) for f in folds if f]


def _inner_select(X, mask, y, w, cols, grid: Sequence[ModelSpec], inner_folds: int,
                  seed: int) -> ModelSpec:
    """Pick the grid entry with the lowest weighted CV mean squared error."""
    if len(grid) == 1:
        return grid[0]
    folds = _stratified_folds(y, inner_folds, seed)
    losses = np.zeros(len(grid))
    for fold in folds:
        train = np.setdiff1d(np.arange(len(y)), fold)
        for g, spec in enumerate(grid):
            model = fit_model(spec, X[train], y[train], w[train], mask=mask[train],
                              cols=cols)
            pred = model.predict(X[fold], mask[fold])
            losses[g] += float(w[fold] @ (pred - y[fold]) ** 2)
    return grid[int(np.argmin(losses))]


@dataclass
class ModelReport:
    spec: ModelSpec
    loocv_pearson: float | None
    undefined_reason: str | None
    predictions: list[tuple[str, float, float]]  # (book_id, actual, predicted)
    chosen: list[dict]
    importance: list[tuple[str, float]] | None = None
    learning_curve: list[dict] | None = None

    def to_dict(self) -> dict:
        return {
            "model": self.spec.kind.value,
            "hyperparameters": self.spec.hyperparameters(),
            "loocv_pearson": self.loocv_pearson,
            "undefined_reason": self.undefined_reason,
            "predictions": [
                {"book_id": b, "actual": a, "predicted": p}
                for b, a, p in self.predictions
            ],
            "chosen_hyperparameters": self.chosen,
            "importance": ([{"dimension_id": d, "score": s} for d, s in self.importance]
                           if self.importance is not None else None),
            "learning_curve": self.learning_curve,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def loocv(matrix, spec: ModelSpec, *, outcome=None, weights=None, mask=None,
          grid: Sequence[ModelSpec] | None = None,
          inner_folds: int = INNER_FOLDS, seed: int = 0) -> ModelReport:
    """Leave-one-out cross-validation with nested hyperparameter selection.

    For each held-out book the hyperparameters are chosen by stratified k-fold
    CV on the remaining books over the grid, the winning model is refit on
    those books, and the held-out prediction is recorded. Reports the Pearson
    correlation between predictions and actuals, flagged as undefined (never
    silently zero) when either side has no variance.
    """
    X, mask, y, w, cols, rows = _as_design(matrix, outcome, weights, mask)
    n = len(y)
    if n < 5:
        raise TooFewBooks(f"need at least 5 books for LOOCV, got {n}")
    if grid is None:
        grid = default_grid(spec, len(cols))

    preds = np.zeros(n)
    chosen: list[dict] = []
    degenerate = 0
    for i in range(n):
        train = np.concatenate([np.arange(i), np.arange(i + 1, n)])
        pick = _inner_select(X[train], mask[train], y[train], w[train], cols,
                             grid, inner_folds, seed)
        model = fit_model(pick, X[train], y[train], w[train], mask=mask[train],
                          cols=cols)
        preds[i] = model.predict(X[i:i + 1], mask[i:i + 1])[0]
        degenerate += getattr(model, "constant_predictor", False)
        chosen.append(pick.hyperparameters())

    r = pearson(preds, y)
    reason = None
    if degenerate == n:
        # Every fold fell back to predicting its own training mean; the
        # resulting correlation is a fold-composition artifact, not a model.
        r = None
        reason = "predictor column has zero variance; folds predict their train means"
    elif r is None:
        reason = ("predictions have zero variance" if np.allclose(preds, preds[0])
                  else "outcome has zero variance")
    report = ModelReport(
        spec=spec, loocv_pearson=r, undefined_reason=reason,
        predictions=[(rows[i], float(y[i]), float(preds[i])) for i in range(n)],
        chosen=chosen,
    )
    if spec.kind is ModelKind.RANDOM_FOREST:
        full_spec = _majority_spec(grid, chosen) if len(grid) > 1 else grid[0]
        full = fit_random_forest(X, y, w, full_spec, mask=mask, cols=cols)
        report.importance = full.ranked_importance()
    return report


def _majority_spec(grid: Sequence[ModelSpec], chosen: list[dict]) -> ModelSpec:
    counts = [0] * len(grid)
    keyed = [g.hyperparameters() for g in grid]
    for pick in chosen:
        counts[keyed.index(pick)] += 1
    return grid[int(np.argmax(counts))]


def learning_curve(matrix, spec: ModelSpec, sizes: Sequence[int], *,
                   repeats: int = 20, seed: int = 0, outcome=None,
                   weights=None, mask=None,
                   grid: Sequence[ModelSpec] | None = None,
                   inner_folds: int = INNER_FOLDS) -> list[dict]:
    """LOOCV accuracy as a function of sample size.

    Each size m is evaluated on ``repeats`` random m-book subsamples; rows
    carry the mean and sd of the per-subsample LOOCV Pearson r.
    """
    X, mask_arr, y, w, cols, rows = _as_design(matrix, outcome, weights, mask)
    n = len(y)
    for m in sizes:
        if not 10 <= m <= n:
            raise SizeOutOfRange(f"size {m} outside [10, {n}]")
    rng = np.random.default_rng(seed)
    out: list[dict] = []
    for m in sizes:
        rs: list[float] = []
        undefined = 0
        for _ in range(repeats):
            pick = np.sort(rng.choice(n, size=m, replace=False))
            sub = FeatureMatrix(
                rows=tuple(rows[i] for i in pick), cols=tuple(cols),
                data=X[pick], mask=mask_arr[pick], outcome=y[pick],
                weights=w[pick])
            report = loocv(sub, spec, grid=grid, inner_folds=inner_folds, seed=seed)
            if report.loocv_pearson is None:
                undefined += 1
            else:
                rs.append(report.loocv_pearson)
        mean = float(np.mean(rs)) if rs else None
        sd = float(np.std(rs)) if rs else None
        out.append({"m": int(m), "mean_r": mean, "sd_r": sd,
                    "repeats": repeats, "undefined": undefined})
    return out


def importance_ranking(report: ModelReport, k: int = 10) -> list[tuple[str, float]]:
    """Top-k dimensions by normalized error reduction in the full-sample forest."""
    if report.spec.kind is not ModelKind.RANDOM_FOREST:
        raise WrongModelKind(f"importance ranking needs a random_forest report, "
                             f"got {report.spec.kind.value}")
    if report.importance is None:
        raise ValueError("report carries no importance scores")
    return report.importance[:k]


def write_model_report(report: ModelReport, path: str | Path) -> None:
    Path(path).write_text(report.to_json() + "\n", encoding="utf-8")


def write_predictions_csv(reports: Sequence[ModelReport], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["book_id", "actual", "predicted", "model"])
        for report in reports:
            for book_id, actual, predicted in report.predictions:
                w.writerow([book_id, repr(actual), repr(predicted),
                            report.spec.kind.value])
