"""Annotation schema registry, shared domain types, and feature-matrix encoding."""

from __future__ import annotations

import csv
import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

SCHEMA_FORMAT_VERSION = 1

_ID_RE = re.compile(r"^[a-z0-9_]+$")


class Group(str, Enum):
    METADATA = "metadata"
    COMMENT_MENTION = "comment_mention"
    TARGET_GROUP = "target_group"
    STYLE = "style"
    MOOD = "mood"
    MAIN_CHARACTER = "main_character"
    THEME = "theme"
    CHARACTER_GOAL = "character_goal"
    STRUGGLE_AGAINST = "struggle_against"
    JOURNAL_NOTE = "journal_note"
    CUSTOM = "custom"


class Kind(str, Enum):
    BINARY = "binary"
    PROPORTION = "proportion"
    COUNT = "count"
    STARS = "stars"


class Source(str, Enum):
    GOODREADS_META = "goodreads_meta"
    COMMENTS = "comments"
    BACKEND_SUMMARY = "backend_summary"
    JOURNAL = "journal"
    USER = "user"


class MediaType(str, Enum):
    BOOK = "book"
    MOVIE = "movie"
    TV = "tv"


class Provenance(str, Enum):
    WIKIPEDIA = "wikipedia"
    GOODREADS = "goodreads"
    BOTH = "both"
    OTHER_WEB = "other_web"
    JOURNAL = "journal"
    USER = "user"
    MOCK = "mock"


class DuplicateDimension(ValueError):
    """A dimension id collides with one already in the schema."""


class InvalidId(ValueError):
    """A dimension id does not match ``[a-z0-9_]+``."""


class MissingRecord(KeyError):
    """A rated book has no annotation record."""


class EmptyCorpus(ValueError):
    """No books were supplied."""


@dataclass(frozen=True)
class Dimension:
    id: str
    label: str
    group: Group
    kind: Kind
    source: Source

    def __post_init__(self) -> None:
        if not _ID_RE.match(self.id):
            raise InvalidId(f"dimension id {self.id!r} must match [a-z0-9_]+")

    def value_ok(self, value: float) -> bool:
        """Whether ``value`` satisfies this dimension kind's range invariant."""
        if not np.isfinite(value):
            return False
        if self.kind is Kind.BINARY:
            return value in (0, 1)
        if self.kind is Kind.PROPORTION:
            return 0.0 <= value <= 1.0
        if self.kind is Kind.COUNT:
            return value >= 0
        return 1.0 <= value <= 5.0  # stars


@dataclass(frozen=True)
class AnnotationSchema:
    dimensions: tuple[Dimension, ...]
    version: int = 1

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for dim in self.dimensions:
            if dim.id in seen:
                raise DuplicateDimension(f"duplicate dimension id {dim.id!r}")
            seen.add(dim.id)

    def ids(self) -> tuple[str, ...]:
        return tuple(d.id for d in self.dimensions)

    def get(self, dim_id: str) -> Dimension:
        for d in self.dimensions:
            if d.id == dim_id:
                return d
        raise KeyError(dim_id)

    def __contains__(self, dim_id: str) -> bool:
        return any(d.id == dim_id for d in self.dimensions)

    def modeling_dimensions(self, include_journal: bool = False) -> tuple[Dimension, ...]:
        """Dimensions eligible for modeling; journal notes excluded by default."""
        return tuple(
            d for d in self.dimensions
            if include_journal or d.group is not Group.JOURNAL_NOTE
        )

    def by_source(self, source: Source) -> tuple[Dimension, ...]:
        return tuple(d for d in self.dimensions if d.source is source)

    def to_json(self) -> str:
        payload = {
            "format_version": SCHEMA_FORMAT_VERSION,
            "version": self.version,
            "dimensions": [
                {
                    "id": d.id,
                    "label": d.label,
                    "group": d.group.value,
                    "kind": d.kind.value,
                    "source": d.source.value,
                }
                for d in self.dimensions
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AnnotationSchema":
        payload = json.loads(text)
        dims = tuple(
            Dimension(
                id=d["id"],
                label=d["label"],
                group=Group(d["group"]),
                kind=Kind(d["kind"]),
                source=Source(d["source"]),
            )
            for d in payload["dimensions"]
        )
        return cls(dimensions=dims, version=payload["version"])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "AnnotationSchema":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def make_book_id(title: str, author: str) -> str:
    """Stable id from lowercase-normalized title and author."""
    norm = lambda s: " ".join(s.strip().lower().split())
    digest = hashlib.sha256(f"{norm(title)}|{norm(author)}".encode("utf-8"))
    return digest.hexdigest()[:16]


@dataclass(frozen=True)
class RatedBook:
    book_id: str
    title: str
    author: str
    raw_rating: float  # 0-100 scale after parsing
    percentile: float | None = None
    dnf: bool = False
    hypothetical: bool = False
    media_type: MediaType = MediaType.BOOK
    journal_note: str | None = None
    weight: float = 1.0

    @classmethod
    def create(cls, title: str, author: str, raw_rating: float, **kw) -> "RatedBook":
        return cls(book_id=make_book_id(title, author), title=title,
                   author=author, raw_rating=float(raw_rating), **kw)


@dataclass(frozen=True)
class AnnotationRecord:
    """Per-book dimension values. A value of None means MISSING (distinct from 0)."""

    book_id: str
    values: Mapping[str, float | None]
    provenance: Mapping[str, Provenance] = field(default_factory=dict)
    found_sources: frozenset[str] = frozenset()
    schema_version: int = 1

    def value(self, dim_id: str) -> float | None:
        return self.values.get(dim_id)

    def is_missing(self, dim_id: str) -> bool:
        return self.values.get(dim_id) is None

    def validate_against(self, schema: AnnotationSchema) -> None:
        known = set(schema.ids())
        unknown = set(self.values) - known
        if unknown:
            raise KeyError(f"record {self.book_id} has unknown dimensions: {sorted(unknown)}")
        for dim_id, value in self.values.items():
            if value is None:
                continue
            dim = schema.get(dim_id)
            if not dim.value_ok(value):
                raise ValueError(
                    f"record {self.book_id}: value {value!r} out of range for "
                    f"{dim_id} (kind={dim.kind.value})"
                )


def coverage_by_book(record: AnnotationRecord, dims: Sequence[Dimension]) -> float:
    """Fraction of the given dimensions that are non-missing for this book."""
    if not dims:
        return 0.0
    present = sum(1 for d in dims if record.values.get(d.id) is not None)
    return present / len(dims)


def coverage_by_dimension(records: Iterable[AnnotationRecord], dim_id: str) -> float:
    records = list(records)
    if not records:
        return 0.0
    present = sum(1 for r in records if r.values.get(dim_id) is not None)
    return present / len(records)


# Canonical schema expansion. The genre list is configuration, not learned.
_GENRES = (
    "fantasy", "sci_fi", "romance", "mystery_crime", "historical", "literary",
    "thriller", "horror", "nonfiction", "classics", "young_adult", "contemporary",
)

_MENTIONS = (
    ("good_characters", "good characters"),
    ("bad_characters", "bad characters"),
    ("bad_writing", "bad writing style"),
    ("good_writing", "good writing style"),
    ("good_plot", "good plot"),
    ("bad_plot", "bad plot"),
    ("fast_pace", "fast pace"),
    ("slow_pace", "slow pace"),
    ("good_setting", "good setting"),
    ("bad_setting", "bad setting"),
    ("dnf", "did not finish"),
    ("addictive", "addictive content"),
    ("intellectual", "intellectual content"),
)

_TARGETS = (
    "women", "men", "romance_lovers", "action_junkies", "poetry_lovers",
    "scientists", "young_people", "adults", "social_activists", "history_fans",
)

_STYLES = (
    "complex", "introspective", "plot_focused", "flowery", "poetic",
    "many_characters", "funny", "experimental",
)

_MOODS = (
    "dark", "light", "happy", "tragic", "thrilling", "serious", "nostalgic",
    "cozy", "fearful", "thought_provoking",
)

_MAIN_CHARACTER = (
    "teenager", "adult", "senior", "male", "female", "minority", "majority",
    "none_clear",
)

_THEMES = (
    "romance", "family", "war", "violence", "politics", "prejudice", "solitude",
    "survival", "magic", "personal_growth", "womens_issues", "money",
    "coming_of_age", "academia",
)

_GOALS = (
    "destroy_evil", "establish_relationship", "survive", "political_aspiration",
    "professional_aspiration", "solve_crime", "defeat_opponent", "inner_peace",
    "understand_self", "protect_someone", "vengeance", "forgive",
    "personal_growth", "escape", "none_clear",
)

_STRUGGLES = (
    "other_character", "society", "nature", "technology", "fate",
    "supernatural", "self",
)

_JOURNAL = (
    ("dnf", "did not finish"),
    ("good_characters", "good characters"),
    ("bad_characters", "bad characters"),
    ("good_writing", "good writing style"),
    ("bad_writing", "bad writing style"),
    ("good_plot", "good plot"),
    ("bad_plot", "bad plot"),
    ("good_setting", "good setting"),
    ("bad_setting", "bad setting"),
    ("addictive", "addictive content"),
)


def default_schema() -> AnnotationSchema:
    """The canonical annotation schema: public metadata, genre flags, comment
    mentions, and the binary content labels, plus journal-note dimensions."""
    dims: list[Dimension] = [
        Dimension("gr_avg_rating", "average public rating", Group.METADATA,
                  Kind.STARS, Source.GOODREADS_META),
        Dimension("gr_num_ratings", "number of public ratings", Group.METADATA,
                  Kind.COUNT, Source.GOODREADS_META),
        Dimension("num_pages", "number of pages", Group.METADATA,
                  Kind.COUNT, Source.GOODREADS_META),
    ]
    dims += [
        Dimension(f"genre_{g}", f"genre: {g.replace('_', ' ')}", Group.METADATA,
                  Kind.BINARY, Source.GOODREADS_META)
        for g in _GENRES
    ]
    dims += [
        Dimension(f"mention_{key}", f"comments mention {label}",
                  Group.COMMENT_MENTION, Kind.PROPORTION, Source.COMMENTS)
        for key, label in _MENTIONS
    ]
    dims += [
        Dimension(f"target_{t}", f"target group: {t.replace('_', ' ')}",
                  Group.TARGET_GROUP, Kind.BINARY, Source.BACKEND_SUMMARY)
        for t in _TARGETS
    ]
    dims += [
        Dimension(f"style_{s}", f"style: {s.replace('_', ' ')}", Group.STYLE,
                  Kind.BINARY, Source.BACKEND_SUMMARY)
        for s in _STYLES
    ]
    dims += [
        Dimension(f"mood_{m}", f"mood: {m.replace('_', ' ')}", Group.MOOD,
                  Kind.BINARY, Source.BACKEND_SUMMARY)
        for m in _MOODS
    ]
    dims += [
        Dimension(f"mc_{c}", f"main character: {c.replace('_', ' ')}",
                  Group.MAIN_CHARACTER, Kind.BINARY, Source.BACKEND_SUMMARY)
        for c in _MAIN_CHARACTER
    ]
    dims += [
        Dimension(f"theme_{t}", f"theme: {t.replace('_', ' ')}", Group.THEME,
                  Kind.BINARY, Source.BACKEND_SUMMARY)
        for t in _THEMES
    ]
    dims += [
        Dimension(f"goal_{g}", f"character goal: {g.replace('_', ' ')}",
                  Group.CHARACTER_GOAL, Kind.BINARY, Source.BACKEND_SUMMARY)
        for g in _GOALS
    ]
    dims += [
        Dimension(f"against_{s}", f"struggle against: {s.replace('_', ' ')}",
                  Group.STRUGGLE_AGAINST, Kind.BINARY, Source.BACKEND_SUMMARY)
        for s in _STRUGGLES
    ]
    dims += [
        Dimension(f"journal_{key}", f"journal: {label}", Group.JOURNAL_NOTE,
                  Kind.BINARY, Source.JOURNAL)
        for key, label in _JOURNAL
    ]
    return AnnotationSchema(dimensions=tuple(dims), version=1)


def extend_schema(schema: AnnotationSchema, new_dims: Sequence[Dimension]) -> AnnotationSchema:
    """Append custom dimensions; never removes or re-types existing ones."""
    if not new_dims:
        return schema
    existing = set(schema.ids())
    appended = []
    for dim in new_dims:
        if dim.id in existing:
            raise DuplicateDimension(f"dimension id {dim.id!r} already in schema")
        existing.add(dim.id)
        appended.append(replace(dim, group=Group.CUSTOM))
    return AnnotationSchema(
        dimensions=schema.dimensions + tuple(appended),
        version=schema.version + 1,
    )


@dataclass(frozen=True)
class EncodeOptions:
    include_journal: bool = False
    exclude: frozenset[str] = frozenset()


@dataclass(frozen=True)
class FeatureMatrix:
    """Wide numeric matrix: one row per book, one column per modeling-eligible
    dimension. ``mask`` is True where a cell is MISSING; ``data`` holds 0.0 there
    and must never be read through the mask."""

    rows: tuple[str, ...]
    cols: tuple[str, ...]
    data: np.ndarray
    mask: np.ndarray
    outcome: np.ndarray
    weights: np.ndarray
    zero_variance: tuple[str, ...] = ()
    schema_version: int = 1

    @property
    def n_books(self) -> int:
        return len(self.rows)

    @property
    def n_dims(self) -> int:
        return len(self.cols)

    def col_index(self, dim_id: str) -> int:
        return self.cols.index(dim_id)

    def column(self, dim_id: str) -> np.ndarray:
        """Column values with NaN in masked cells."""
        j = self.col_index(dim_id)
        out = self.data[:, j].astype(float).copy()
        out[self.mask[:, j]] = np.nan
        return out

    def drop_columns(self, dim_ids: Iterable[str]) -> "FeatureMatrix":
        drop = set(dim_ids)
        keep = [j for j, c in enumerate(self.cols) if c not in drop]
        return FeatureMatrix(
            rows=self.rows,
            cols=tuple(self.cols[j] for j in keep),
            data=self.data[:, keep].copy(),
            mask=self.mask[:, keep].copy(),
            outcome=self.outcome.copy(),
            weights=self.weights.copy(),
            zero_variance=tuple(c for c in self.zero_variance if c not in drop),
            schema_version=self.schema_version,
        )

    def to_csv(self, path: str | Path) -> None:
        """Write matrix.csv plus a sibling .mask.csv (1 = missing).

        Format: UTF-8, comma-separated, LF line endings. First column is
        book_id, then one column per dimension in schema order, last column is
        the percentile outcome. Floats use shortest round-trip repr; masked
        cells are empty in matrix.csv and 1 in the mask file.
        """
        path = Path(path)
        mask_path = path.with_suffix(".mask.csv")
        header = ["book_id", *self.cols, "outcome"]
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i, book_id in enumerate(self.rows):
                cells: list[str] = [book_id]
                for j in range(self.n_dims):
                    cells.append("" if self.mask[i, j] else repr(float(self.data[i, j])))
                cells.append(repr(float(self.outcome[i])))
                w.writerow(cells)
        with mask_path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["book_id", *self.cols])
            for i, book_id in enumerate(self.rows):
                w.writerow([book_id, *(str(int(m)) for m in self.mask[i])])

    @classmethod
    def from_csv(cls, path: str | Path, schema_version: int = 1) -> "FeatureMatrix":
        path = Path(path)
        with path.open("r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        header = rows[0]
        cols = tuple(header[1:-1])
        book_ids, data, mask, outcome = [], [], [], []
        for row in rows[1:]:
            book_ids.append(row[0])
            vals, miss = [], []
            for cell in row[1:-1]:
                if cell == "":
                    vals.append(0.0)
                    miss.append(True)
                else:
                    vals.append(float(cell))
                    miss.append(False)
            data.append(vals)
            mask.append(miss)
            outcome.append(float(row[-1]))
        data_arr = np.asarray(data, dtype=float)
        mask_arr = np.asarray(mask, dtype=bool)
        return cls(
            rows=tuple(book_ids), cols=cols, data=data_arr, mask=mask_arr,
            outcome=np.asarray(outcome, dtype=float),
            weights=np.ones(len(book_ids)),
            zero_variance=_zero_variance_cols(cols, data_arr, mask_arr),
            schema_version=schema_version,
        )


def _zero_variance_cols(cols: Sequence[str], data: np.ndarray,
                        mask: np.ndarray) -> tuple[str, ...]:
    flagged = []
    for j, col in enumerate(cols):
        present = ~mask[:, j]
        vals = data[present, j]
        if vals.size == 0 or np.all(vals == vals[0]):
            flagged.append(col)
    return tuple(flagged)


def encode_matrix(
    books: Sequence[RatedBook],
    records: Sequence[AnnotationRecord],
    schema: AnnotationSchema,
    opts: EncodeOptions = EncodeOptions(),
) -> FeatureMatrix:
    """Encode annotated books into the wide modeling matrix.

    Every book must already carry a percentile (the rank transform runs in
    ingest) and have an annotation record. Missing cells are masked, never
    zero-filled from the caller's point of view.
    """
    if not books:
        raise EmptyCorpus("no books to encode")
    by_id = {r.book_id: r for r in records}
    for book in books:
        if book.book_id not in by_id:
            raise MissingRecord(f"book {book.book_id} ({book.title!r}) has no annotation record")
        if book.percentile is None:
            raise ValueError(f"book {book.book_id} has no percentile; run the rank transform first")

    dims = [d for d in schema.modeling_dimensions(opts.include_journal)
            if d.id not in opts.exclude]
    n, p = len(books), len(dims)
    data = np.zeros((n, p))
    mask = np.zeros((n, p), dtype=bool)
    for i, book in enumerate(books):
        record = by_id[book.book_id]
        for j, dim in enumerate(dims):
            value = record.values.get(dim.id)
            if value is None:
                mask[i, j] = True
            else:
                if not dim.value_ok(value):
                    raise ValueError(
                        f"book {book.book_id}: value {value!r} out of range for "
                        f"{dim.id} (kind={dim.kind.value})"
                    )
                data[i, j] = float(value)

    cols = tuple(d.id for d in dims)
    return FeatureMatrix(
        rows=tuple(b.book_id for b in books),
        cols=cols,
        data=data,
        mask=mask,
        outcome=np.asarray([b.percentile for b in books], dtype=float),
        weights=np.asarray([b.weight for b in books], dtype=float),
        zero_variance=_zero_variance_cols(cols, data, mask),
        schema_version=schema.version,
    )
