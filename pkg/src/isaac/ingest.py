"""Rating-export parsing, skewness, percentile ranks, and cross-media merging."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .core import MediaType, RatedBook, make_book_id

logger = logging.getLogger(__name__)

# Goodreads export columns we consume; all others are ignored.
_GOODREADS_REQUIRED = ("Title", "Author", "My Rating")
_SIMPLE_REQUIRED = ("title", "author", "rating")

STAR_TO_PERCENT = {1: 20.0, 2: 40.0, 3: 60.0, 4: 80.0, 5: 100.0}


class FormatError(ValueError):
    """The ratings file lacks required columns or has unparseable rows."""


class EmptyFile(ValueError):
    """The ratings file contains no data rows."""


class DegenerateSample(ValueError):
    """Too few values or zero variance for the requested statistic."""


class UnflaggedExtra(ValueError):
    """A merged item is neither cross-media nor hypothetical."""


class RatingsFormat(str, Enum):
    GOODREADS_CSV = "goodreads_csv"
    SIMPLE_CSV = "simple_csv"


class DnfPolicy(str, Enum):
    INCLUDE = "include"
    EXCLUDE = "exclude"
    IMPUTE_FLOOR = "impute-floor"


@dataclass(frozen=True)
class RatingsFile:
    path: Path
    format: RatingsFormat

    @classmethod
    def open(cls, path: str | Path, fmt: str | RatingsFormat | None = None) -> "RatingsFile":
        path = Path(path)
        if fmt is None:
            return cls(path=path, format=detect_format(path))
        return cls(path=path, format=RatingsFormat(fmt))


def detect_format(path: str | Path) -> RatingsFormat:
    with Path(path).open("r", encoding="utf-8-sig", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path} is empty")
    if all(col in header for col in _GOODREADS_REQUIRED):
        return RatingsFormat.GOODREADS_CSV
    if all(col in header for col in _SIMPLE_REQUIRED):
        return RatingsFormat.SIMPLE_CSV
    raise FormatError(
        f"{path}: cannot detect format; expected Goodreads export columns "
        f"{_GOODREADS_REQUIRED} or simple columns {_SIMPLE_REQUIRED}"
    )


def _parse_bool(cell: str) -> bool:
    return cell.strip().lower() in ("1", "true", "yes", "y")


def parse_ratings_export(file: RatingsFile | str | Path) -> list[RatedBook]:
    """Parse a ratings export into RatedBooks on the 0-100 scale.

    Goodreads 1-5 star ratings map to {20, 40, 60, 80, 100}; a star rating of
    0 means unrated and the row is excluded with a warning.
    """
    if not isinstance(file, RatingsFile):
        file = RatingsFile.open(file)
    with file.path.open("r", encoding="utf-8-sig", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise EmptyFile(f"{file.path} has no data rows")

    books: list[RatedBook] = []
    if file.format is RatingsFormat.GOODREADS_CSV:
        missing = [c for c in _GOODREADS_REQUIRED if c not in rows[0]]
        if missing:
            raise FormatError(f"{file.path}: missing Goodreads columns {missing}")
        for i, row in enumerate(rows, start=2):
            title, author = row["Title"].strip(), row["Author"].strip()
            try:
                stars = int(float(row["My Rating"]))
            except (TypeError, ValueError):
                raise FormatError(f"{file.path}:{i}: bad My Rating {row['My Rating']!r}")
            if stars == 0:
                logger.warning("%s:%d: %r is unrated (My Rating=0); excluded", file.path, i, title)
                continue
            if stars not in STAR_TO_PERCENT:
                raise FormatError(f"{file.path}:{i}: star rating {stars} outside 1-5")
            books.append(RatedBook.create(title, author, STAR_TO_PERCENT[stars]))
    else:
        missing = [c for c in _SIMPLE_REQUIRED if c not in rows[0]]
        if missing:
            raise FormatError(f"{file.path}: missing columns {missing}")
        for i, row in enumerate(rows, start=2):
            raw = (row["rating"] or "").strip()
            if raw == "" or raw.lower() == "unrated":
                logger.warning("%s:%d: %r is unrated; excluded", file.path, i, row["title"])
                continue
            try:
                rating = float(raw)
            except ValueError:
                raise FormatError(f"{file.path}:{i}: bad rating {raw!r}")
            if not 0.0 <= rating <= 100.0:
                raise FormatError(f"{file.path}:{i}: rating {rating} outside 0-100")
            books.append(RatedBook.create(
                row["title"].strip(), row["author"].strip(), rating,
                dnf=_parse_bool(row.get("dnf", "")),
                hypothetical=_parse_bool(row.get("hypothetical", "")),
                media_type=MediaType(row.get("media_type", "").strip() or "book"),
            ))
    return books


def write_simple_csv(books: Sequence[RatedBook], path: str | Path) -> None:
    """Serialize books back to the documented simple CSV (lossless for parse round-trips)."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["title", "author", "rating", "dnf", "hypothetical", "media_type"])
        for b in books:
            w.writerow([
                b.title, b.author, repr(float(b.raw_rating)),
                int(b.dnf), int(b.hypothetical), b.media_type.value,
            ])


def goodreads_metadata(file: RatingsFile | str | Path) -> dict[str, dict[str, float]]:
    """Pull the public metadata columns the export happens to carry
    (Average Rating, Number of Pages), keyed by book_id, for seeding annotations."""
    if not isinstance(file, RatingsFile):
        file = RatingsFile.open(file)
    if file.format is not RatingsFormat.GOODREADS_CSV:
        return {}
    out: dict[str, dict[str, float]] = {}
    with file.path.open("r", encoding="utf-8-sig", newline="") as fh:
        for row in csv.DictReader(fh):
            values: dict[str, float] = {}
            avg = (row.get("Average Rating") or "").strip()
            pages = (row.get("Number of Pages") or "").strip()
            if avg:
                try:
                    values["gr_avg_rating"] = float(avg)
                except ValueError:
                    pass
            if pages:
                try:
                    values["num_pages"] = float(pages)
                except ValueError:
                    pass
            if values:
                out[make_book_id(row["Title"], row["Author"])] = values
    return out


def skewness(values: Sequence[float]) -> float:
    """Sample skewness g1 = m3 / m2^(3/2)."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 3:
        raise DegenerateSample(f"need at least 3 values, got {arr.size}")
    centered = arr - arr.mean()
    m2 = np.mean(centered ** 2)
    if m2 == 0.0:
        raise DegenerateSample("zero variance")
    m3 = np.mean(centered ** 3)
    return float(m3 / m2 ** 1.5)


def skewness_corrected(values: Sequence[float]) -> float:
    """Bias-corrected sample skewness G1 = g1 * sqrt(n(n-1)) / (n-2)."""
    n = len(values)
    if n < 3:
        raise DegenerateSample(f"need at least 3 values, got {n}")
    return skewness(values) * math.sqrt(n * (n - 1)) / (n - 2)


def percentile_rank(values: Sequence[float]) -> list[float]:
    """Rank-based transform to (0, 1): (rank - 0.5) / n, ties averaged."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return []
    ranks = rankdata(arr, method="average")
    return list((ranks - 0.5) / arr.size)


def apply_percentiles(books: Sequence[RatedBook]) -> list[RatedBook]:
    """Attach percentile ranks computed over the raw ratings of all given books."""
    prs = percentile_rank([b.raw_rating for b in books])
    return [replace(b, percentile=pr) for b, pr in zip(books, prs)]


def apply_dnf_policy(books: Sequence[RatedBook], policy: DnfPolicy | str) -> list[RatedBook]:
    """Survivorship handling for unfinished books.

    include: keep DNF ratings as given (default). exclude: drop them.
    impute-floor: set each DNF rating to the lowest non-DNF rating in the set.
    """
    policy = DnfPolicy(policy)
    if policy is DnfPolicy.INCLUDE:
        return list(books)
    if policy is DnfPolicy.EXCLUDE:
        return [b for b in books if not b.dnf]
    finished = [b.raw_rating for b in books if not b.dnf]
    floor = min(finished) if finished else 0.0
    return [replace(b, raw_rating=floor) if b.dnf else b for b in books]


@dataclass(frozen=True)
class JournalNotes:
    by_book_id: dict[str, str]
    unmatched: tuple[str, ...]


def parse_journal_notes(path: str | Path,
                        books: Sequence[RatedBook]) -> tuple[list[RatedBook], JournalNotes]:
    """Attach private notes to matching books.

    The file is a CSV with header ``title,note`` or ``title,author,note``.
    Titles that match no book are reported, never dropped silently.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8-sig", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and not ({"title", "note"} <= set(rows[0])):
        raise FormatError(f"{path}: expected columns title,note or title,author,note")

    by_title = {b.title.strip().lower(): b for b in books}
    by_id = {b.book_id: b for b in books}
    notes: dict[str, str] = {}
    unmatched: list[str] = []
    for row in rows:
        title = row["title"].strip()
        author = (row.get("author") or "").strip()
        note = (row.get("note") or "").strip()
        if author:
            book = by_id.get(make_book_id(title, author))
        else:
            book = by_title.get(title.lower())
        if book is None:
            unmatched.append(title)
            logger.warning("%s: note for unknown title %r not attached", path, title)
        else:
            notes[book.book_id] = note

    updated = [replace(b, journal_note=notes[b.book_id]) if b.book_id in notes else b
               for b in books]
    return updated, JournalNotes(by_book_id=notes, unmatched=tuple(unmatched))


def merge_media_ratings(books: Sequence[RatedBook], extra: Sequence[RatedBook],
                        weight: float = 0.5) -> list[RatedBook]:
    """Append cross-media or hypothetical ratings and recompute percentiles
    over the union. Real book ratings keep weight 1.0; merged items carry
    ``weight``, consumed downstream as a sample weight."""
    if not 0.0 < weight <= 1.0:
        raise ValueError(f"weight must be in (0, 1], got {weight}")
    for item in extra:
        if item.media_type is MediaType.BOOK and not item.hypothetical:
            raise UnflaggedExtra(
                f"{item.title!r} is neither cross-media nor hypothetical; "
                "flag it before merging"
            )
    merged = [replace(b, weight=1.0) for b in books]
    merged += [replace(b, weight=weight) for b in extra]
    return apply_percentiles(merged)
