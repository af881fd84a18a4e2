"""Per-dimension enjoyment effects: Pearson point estimates, grid-posterior
credible intervals under a scaled flat prior, and expectation concordance."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import FeatureMatrix, Kind

DEFAULT_GRID_SIZE = 2001
PRIOR_LO, PRIOR_HI = -0.5, 0.5
DEFAULT_MIN_N = 3


class NothingComparable(ValueError):
    """No dimension has both a nonzero expected sign and an estimable effect."""


@dataclass(frozen=True)
class EffectEstimate:
    dimension_id: str
    r: float | None
    ci80: tuple[float, float] | None
    n_level: Mapping[str, int]
    inestimable: bool = False
    low_n: bool = False

    @property
    def ci_width(self) -> float | None:
        if self.ci80 is None:
            return None
        return self.ci80[1] - self.ci80[0]


@dataclass(frozen=True)
class Expectation:
    sign: int  # -1, 0, +1
    band: tuple[float, float] | None = None


@dataclass(frozen=True)
class ExpectationSet:
    by_dimension: Mapping[str, Expectation]
    registered_at: str = ""
    locked: bool = False
    post_hoc: bool = False

    def to_dict(self) -> dict:
        return {
            "registered_at": self.registered_at,
            "locked": self.locked,
            "post_hoc": self.post_hoc,
            "expectations": {
                dim: {"sign": e.sign, "band": list(e.band) if e.band else None}
                for dim, e in sorted(self.by_dimension.items())
            },
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "ExpectationSet":
        return cls(
            by_dimension={
                dim: Expectation(sign=int(e["sign"]),
                                 band=tuple(e["band"]) if e.get("band") else None)
                for dim, e in payload.get("expectations", {}).items()
            },
            registered_at=payload.get("registered_at", ""),
            locked=bool(payload.get("locked", False)),
            post_hoc=bool(payload.get("post_hoc", False)),
        )


def pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    """Sample Pearson correlation, or None when either side has zero variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        return None
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        return None
    return float(xc @ yc / denom)


def _standardize(v: np.ndarray) -> np.ndarray:
    sd = v.std(ddof=1)
    return (v - v.mean()) / sd


def posterior_on_grid(x_std: np.ndarray, y_std: np.ndarray, sigma: float,
                      grid_size: int = DEFAULT_GRID_SIZE) -> tuple[np.ndarray, np.ndarray]:
    """Posterior over the slope on a uniform grid over [-0.5, 0.5].

    The prior is flat on the grid (a Beta(1,1) rescaled to the support); the
    intercept has a flat prior and integrates out to centering, and sigma is
    plugged in. Passing sigma=inf yields the pure prior (flat likelihood).
    """
    grid = np.linspace(PRIOR_LO, PRIOR_HI, grid_size)
    if math.isinf(sigma):
        log_like = np.zeros(grid_size)
    else:
        sigma = max(sigma, 1e-12)
        resid = y_std[:, None] - grid[None, :] * x_std[:, None]
        resid = resid - resid.mean(axis=0, keepdims=True)  # intercept integrated out
        log_like = -np.sum(resid ** 2, axis=0) / (2.0 * sigma ** 2)
    log_like -= log_like.max()
    post = np.exp(log_like)
    post /= post.sum()
    return grid, post


def grid_quantile(grid: np.ndarray, post: np.ndarray, q: float) -> float:
    cdf = np.cumsum(post)
    idx = int(np.searchsorted(cdf, q, side="left"))
    return float(grid[min(idx, len(grid) - 1)])


def effect_estimate(x: np.ndarray, y: np.ndarray, *,
                    grid_size: int = DEFAULT_GRID_SIZE,
                    dimension_id: str = "",
                    n_level: Mapping[str, int] | None = None,
                    low_n: bool = False,
                    sigma_override: float | None = None) -> EffectEstimate:
    """Effect of one dimension on the percentile outcome.

    ``x`` may contain NaN for MISSING cells; those books are dropped. The
    outcome is standardized over the retained books, the slope prior is flat
    over [-0.5, 0.5] on a grid, and sigma comes from the least-squares
    residual standard deviation. ``sigma_override`` exists as a test hook
    (inf = flat likelihood, pure prior).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    present = ~np.isnan(x)
    xv, yv = x[present], y[present]
    n_level = dict(n_level or {"n": int(xv.size)})

    inestimable = EffectEstimate(dimension_id=dimension_id, r=None, ci80=None,
                                 n_level=n_level, inestimable=True, low_n=low_n)
    if xv.size < 3:
        return inestimable
    if np.all(xv == xv[0]) or np.all(yv == yv[0]):
        return inestimable

    r = pearson(xv, yv)
    x_std = _standardize(xv)
    y_std = _standardize(yv)

    if sigma_override is not None:
        sigma = sigma_override
    else:
        # Least-squares residual sd of y_std on x_std (slope = r by construction).
        slope = float(x_std @ y_std) / float(x_std @ x_std)
        resid = y_std - slope * x_std
        df = max(xv.size - 2, 1)
        sigma = math.sqrt(float(resid @ resid) / df)

    grid, post = posterior_on_grid(x_std, y_std, sigma, grid_size)
    lo = grid_quantile(grid, post, 0.1)
    hi = grid_quantile(grid, post, 0.9)
    return EffectEstimate(dimension_id=dimension_id, r=r, ci80=(lo, hi),
                          n_level=n_level, inestimable=False, low_n=low_n)


def _level_counts(values: np.ndarray, kind: Kind) -> dict[str, int]:
    present = values[~np.isnan(values)]
    if kind is Kind.BINARY:
        return {
            "0": int(np.sum(present == 0.0)),
            "1": int(np.sum(present == 1.0)),
        }
    return {"n": int(present.size)}


def _is_low_n(counts: Mapping[str, int], kind: Kind, min_n: int) -> bool:
    if kind is Kind.BINARY:
        return min(counts.get("0", 0), counts.get("1", 0)) < min_n
    return counts.get("n", 0) < min_n


def effect_table(matrix: FeatureMatrix, schema=None, *,
                 expectations: ExpectationSet | None = None,
                 min_n: int = DEFAULT_MIN_N,
                 grid_size: int = DEFAULT_GRID_SIZE) -> list[EffectEstimate]:
    """One effect estimate per column, sorted by r descending (inestimable
    last). Dimensions read in only a few books are flagged low-n rather than
    dropped; their intervals are wide and should be read as such."""
    if matrix.n_books == 0:
        raise ValueError("matrix has no rows")
    estimates: list[EffectEstimate] = []
    for dim_id in matrix.cols:
        values = matrix.column(dim_id)
        kind = schema.get(dim_id).kind if schema is not None and dim_id in schema else None
        if kind is None:
            present = values[~np.isnan(values)]
            binaryish = present.size > 0 and set(np.unique(present)) <= {0.0, 1.0}
            kind = Kind.BINARY if binaryish else Kind.COUNT
        counts = _level_counts(values, kind)
        estimates.append(effect_estimate(
            values, matrix.outcome, grid_size=grid_size, dimension_id=dim_id,
            n_level=counts, low_n=_is_low_n(counts, kind, min_n)))

    estimates.sort(key=lambda e: (e.inestimable, -(e.r if e.r is not None else -math.inf),
                                  e.dimension_id))
    return estimates


@dataclass(frozen=True)
class ConcordanceResult:
    percent: int
    matches: int
    compared: int
    verdicts: Mapping[str, str] = field(default_factory=dict)  # match|mismatch|excluded:<why>


def concordance(effects: Sequence[EffectEstimate],
                expectations: ExpectationSet) -> ConcordanceResult:
    """Share of dimensions whose expected sign matches the observed correlation
    sign. Zero expectations, inestimable effects, and exactly-zero correlations
    are excluded from the denominator and reported separately."""
    verdicts: dict[str, str] = {}
    matches = compared = 0
    by_dim = {e.dimension_id: e for e in effects}
    for dim_id, expect in sorted(expectations.by_dimension.items()):
        effect = by_dim.get(dim_id)
        if effect is None:
            verdicts[dim_id] = "excluded:no_effect"
            continue
        if expect.sign == 0:
            verdicts[dim_id] = "excluded:zero_expectation"
            continue
        if effect.inestimable or effect.r is None:
            verdicts[dim_id] = "excluded:inestimable"
            continue
        if effect.r == 0.0:
            verdicts[dim_id] = "excluded:zero_correlation"
            continue
        compared += 1
        if (effect.r > 0) == (expect.sign > 0):
            matches += 1
            verdicts[dim_id] = "match"
        else:
            verdicts[dim_id] = "mismatch"
    if compared == 0:
        raise NothingComparable("no dimension has a nonzero expectation and an estimable effect")
    percent = int(math.floor(100.0 * matches / compared + 0.5))
    return ConcordanceResult(percent=percent, matches=matches, compared=compared,
                             verdicts=verdicts)


def effects_rows(effects: Sequence[EffectEstimate],
                 expectations: ExpectationSet | None = None) -> list[dict]:
    rows = []
    for e in effects:
        expect = (expectations.by_dimension.get(e.dimension_id)
                  if expectations is not None else None)
        flags = []
        if e.inestimable:
            flags.append("inestimable")
        if e.low_n:
            flags.append("low_n")
        rows.append({
            "dimension_id": e.dimension_id,
            "r": e.r,
            "ci_lo": e.ci80[0] if e.ci80 else None,
            "ci_hi": e.ci80[1] if e.ci80 else None,
            "n_level": dict(e.n_level),
            "flag": ",".join(flags),
            "expected_sign": expect.sign if expect else None,
            "band_lo": expect.band[0] if expect and expect.band else None,
            "band_hi": expect.band[1] if expect and expect.band else None,
        })
    return rows


def write_effects_csv(effects: Sequence[EffectEstimate], path: str | Path,
                      expectations: ExpectationSet | None = None) -> None:
    rows = effects_rows(effects, expectations)
    post_hoc = bool(expectations.post_hoc) if expectations is not None else False
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dimension_id", "r", "ci_lo", "ci_hi", "n_level", "flag",
                    "expected_sign", "band_lo", "band_hi", "expectations_post_hoc"])
        for row in rows:
            w.writerow([
                row["dimension_id"],
                "" if row["r"] is None else repr(row["r"]),
                "" if row["ci_lo"] is None else repr(row["ci_lo"]),
                "" if row["ci_hi"] is None else repr(row["ci_hi"]),
                json.dumps(row["n_level"], sort_keys=True),
                row["flag"],
                "" if row["expected_sign"] is None else row["expected_sign"],
                "" if row["band_lo"] is None else repr(row["band_lo"]),
                "" if row["band_hi"] is None else repr(row["band_hi"]),
                int(post_hoc),
            ])


def write_effects_json(effects: Sequence[EffectEstimate], path: str | Path,
                       expectations: ExpectationSet | None = None) -> None:
    payload = {
        "expectations_post_hoc": bool(expectations.post_hoc) if expectations else False,
        "effects": effects_rows(effects, expectations),
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
