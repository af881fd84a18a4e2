"""Annotation pipeline: research, structured labeling, comment classification,
and the resumable run driver with its persisted record store."""

from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from ..core import (
    AnnotationRecord,
    AnnotationSchema,
    Dimension,
    Group,
    Kind,
    Provenance,
    RatedBook,
    Source,
)
from .backends import AnnotationBackend, NotDocumented, ResearchResult, SourceReport

logger = logging.getLogger(__name__)

#: Version of the value-coercion table below. Bump when the table changes.
COERCION_VERSION = 1

_TRUE_WORDS = {"1", "true", "yes", "y"}
_FALSE_WORDS = {"0", "false", "no", "n"}


class NoComments(Exception):
    """A comment batch had no comments; mention dimensions stay MISSING."""


def coerce_value(raw: object, kind: Kind) -> float | None:
    """Coerce sloppy backend output to a valid dimension value, or None.

    Coercion table v1: booleans and the words yes/no/true/false/y/n map to
    1/0 for binary dims; numeric strings are parsed; values outside the
    kind's range (or anything else) coerce to None, i.e. MISSING.
    """
    if raw is None:
        return None
    if isinstance(raw, bool):
        value = 1.0 if raw else 0.0
    elif isinstance(raw, (int, float)):
        value = float(raw)
    elif isinstance(raw, str):
        word = raw.strip().lower()
        if word in _TRUE_WORDS:
            value = 1.0
        elif word in _FALSE_WORDS:
            value = 0.0
        else:
            try:
                value = float(word.rstrip("%")) / 100.0 if word.endswith("%") else float(word)
            except ValueError:
                return None
    else:
        return None

    if kind is Kind.BINARY and value in (0.0, 1.0):
        return value
    if kind is Kind.PROPORTION and 0.0 <= value <= 1.0:
        return value
    if kind is Kind.COUNT and value >= 0:
        return value
    if kind is Kind.STARS and 1.0 <= value <= 5.0:
        return value
    return None


@dataclass(frozen=True)
class CommentBatch:
    book_id: str
    comments: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.comments) > 60:
            object.__setattr__(self, "comments", self.comments[:60])

    @property
    def actual_count(self) -> int:
        return len(self.comments)


def research_book(backend: AnnotationBackend, title: str, author: str) -> ResearchResult:
    if not title.strip() or not author.strip():
        raise ValueError("title and author must be non-empty")
    result = backend.research(title, author)
    if not result.report.found_on:
        raise NotDocumented(f"{title!r} by {author!r}: no sources found")
    return result


def annotate_dimensions(backend: AnnotationBackend, summary: str,
                        schema: AnnotationSchema) -> dict[str, float | None]:
    """Label the backend-summary dimensions from a research summary.

    Unknown keys in the reply are dropped with a warning; unparseable values
    become MISSING after coercion.
    """
    if not summary.strip():
        raise ValueError("summary must be non-empty")
    dims = schema.by_source(Source.BACKEND_SUMMARY)
    labels = [d.id for d in dims]
    raw = backend.classify(summary, labels)
    known = {d.id: d for d in dims}
    values: dict[str, float | None] = {d.id: None for d in dims}
    for key, value in raw.items():
        dim = known.get(key)
        if dim is None:
            logger.warning("dropping unknown annotation key %r", key)
            continue
        values[key] = coerce_value(value, dim.kind)
    return values


def classify_comments(backend: AnnotationBackend, batch: CommentBatch,
                      mention_dims: Sequence[Dimension]) -> dict[str, float | None]:
    """Per-dimension mention proportions over the available comments."""
    if batch.actual_count == 0:
        logger.warning("book %s has no comments; mention dims left MISSING", batch.book_id)
        raise NoComments(batch.book_id)
    labels = [d.id for d in mention_dims]
    per_comment = backend.classify_many(batch.comments, labels)
    counts = {label: 0 for label in labels}
    for reply in per_comment:
        for dim in mention_dims:
            if coerce_value(reply.get(dim.id), Kind.BINARY) == 1.0:
                counts[dim.id] += 1
    return {label: counts[label] / batch.actual_count for label in labels}


def annotate_notes(backend: AnnotationBackend, note: str,
                   journal_dims: Sequence[Dimension]) -> dict[str, float | None]:
    """Binary journal-note labels; these never enter modeling by default."""
    if not note.strip():
        raise ValueError("note must be non-empty")
    raw = backend.classify(note, [d.id for d in journal_dims])
    return {d.id: coerce_value(raw.get(d.id), Kind.BINARY) for d in journal_dims}


class RecordStore:
    """Single-writer JSONL store for annotation records, keyed by book_id.

    Lines are written with sorted keys and compact separators so a repeated
    run over the same corpus is byte-identical.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: dict[str, AnnotationRecord] = {}
        if self.path.exists():
            for lineno, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                record = record_from_json(line, lineno=lineno)
                self._records[record.book_id] = record

    def __contains__(self, book_id: str) -> bool:
        return book_id in self._records

    def __len__(self) -> int:
        return len(self._records)

    def get(self, book_id: str) -> AnnotationRecord | None:
        return self._records.get(book_id)

    def records(self) -> list[AnnotationRecord]:
        return [self._records[k] for k in sorted(self._records)]

    def add(self, record: AnnotationRecord) -> None:
        with self._lock:
            self._records[record.book_id] = record
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(record_to_json(record) + "\n")

    def rewrite(self) -> None:
        """Rewrite the file in book_id order (canonical form)."""
        with self._lock:
            tmp = self.path.with_suffix(".tmp")
            with tmp.open("w", encoding="utf-8") as fh:
                for record in self.records():
                    fh.write(record_to_json(record) + "\n")
            tmp.replace(self.path)


def record_to_json(record: AnnotationRecord) -> str:
    return json.dumps(
        {
            "book_id": record.book_id,
            "schema_version": record.schema_version,
            "values": dict(record.values),
            "provenance": {k: v.value for k, v in record.provenance.items()},
            "found_sources": sorted(record.found_sources),
        },
        sort_keys=True,
        separators=(",", ":"),
    )


def record_from_json(line: str, lineno: int = 0) -> AnnotationRecord:
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as err:
        raise ValueError(f"bad record at line {lineno}: {err}") from err
    return AnnotationRecord(
        book_id=payload["book_id"],
        values=payload["values"],
        provenance={k: Provenance(v) for k, v in payload.get("provenance", {}).items()},
        found_sources=frozenset(payload.get("found_sources", ())),
        schema_version=payload.get("schema_version", 1),
    )


@dataclass
class RunReport:
    total: int = 0
    annotated: int = 0
    skipped_cached: int = 0
    failures: dict[str, str] = field(default_factory=dict)
    coverage: dict[str, int] = field(default_factory=dict)
    retries: int = 0

    @property
    def failure_count(self) -> int:
        return len(self.failures)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "annotated": self.annotated,
            "skipped_cached": self.skipped_cached,
            "failures": dict(sorted(self.failures.items())),
            "coverage": dict(sorted(self.coverage.items())),
            "retries": self.retries,
        }


def _coverage_counts(reports: Mapping[str, SourceReport]) -> dict[str, int]:
    wiki = sum(1 for r in reports.values() if "wikipedia" in r.found_on)
    gr = sum(1 for r in reports.values() if "goodreads" in r.found_on)
    both = sum(1 for r in reports.values()
               if {"wikipedia", "goodreads"} <= r.found_on)
    other = sum(1 for r in reports.values()
                if not ({"wikipedia", "goodreads"} & r.found_on))
    return {"wikipedia": wiki, "goodreads": gr, "both": both, "other_only": other}


def _metadata_values(metadata: Mapping[str, object],
                     schema: AnnotationSchema) -> dict[str, float | None]:
    values: dict[str, float | None] = {}
    mapping = {
        "gr_avg_rating": ("avg_rating", Kind.STARS),
        "gr_num_ratings": ("num_ratings", Kind.COUNT),
        "num_pages": ("num_pages", Kind.COUNT),
    }
    for dim_id, (meta_key, kind) in mapping.items():
        if dim_id in schema:
            values[dim_id] = coerce_value(metadata.get(meta_key), kind)
    genres = metadata.get("genres") or ()
    genre_dims = [d for d in schema.dimensions if d.id.startswith("genre_")]
    if genre_dims:
        normalized = {str(g).strip().lower().replace("-", "_").replace(" ", "_")
                      for g in genres}
        for dim in genre_dims:
            values[dim.id] = 1.0 if dim.id.removeprefix("genre_") in normalized else 0.0
    return values


def load_comment_files(directory: str | Path) -> dict[str, tuple[str, ...]]:
    """Read user-supplied comment files: comments/<book_id>.txt, one comment
    per line. These take precedence over backend-returned comments."""
    directory = Path(directory)
    out: dict[str, tuple[str, ...]] = {}
    if not directory.is_dir():
        return out
    for path in sorted(directory.glob("*.txt")):
        lines = tuple(line.strip() for line in
                      path.read_text(encoding="utf-8").splitlines() if line.strip())
        out[path.stem] = lines
    return out


def annotate_one(backend: AnnotationBackend, book: RatedBook,
                 schema: AnnotationSchema,
                 seed_values: Mapping[str, float] | None = None,
                 comments_override: Sequence[str] | None = None,
                 mock_provenance: bool = False) -> tuple[AnnotationRecord, SourceReport]:
    """Full annotation of a single book: research, metadata, summary labels,
    comment proportions, and journal-note labels when a note is present."""
    research = research_book(backend, book.title, book.author)
    values: dict[str, float | None] = {d.id: None for d in schema.dimensions}
    provenance: dict[str, Provenance] = {}
    source_prov = Provenance.MOCK if mock_provenance else research.report.provenance()

    values.update(_metadata_values(research.metadata, schema))
    if seed_values:
        for dim_id, seeded in seed_values.items():
            if dim_id in schema and values.get(dim_id) is None:
                values[dim_id] = coerce_value(seeded, schema.get(dim_id).kind)

    if research.summary.strip():
        values.update(annotate_dimensions(backend, research.summary, schema))

    mention_dims = schema.by_source(Source.COMMENTS)
    if mention_dims:
        comments = (tuple(comments_override) if comments_override is not None
                    else tuple(research.comments))
        batch = CommentBatch(book_id=book.book_id, comments=comments)
        if batch.actual_count > 0:
            values.update(classify_comments(backend, batch, mention_dims))
        else:
            logger.warning("book %s has no comments; mention dims MISSING", book.book_id)

    journal_dims = [d for d in schema.dimensions if d.group is Group.JOURNAL_NOTE]
    if journal_dims and book.journal_note and book.journal_note.strip():
        journal = annotate_notes(backend, book.journal_note, journal_dims)
        values.update(journal)
        for dim_id in journal:
            provenance[dim_id] = Provenance.JOURNAL

    for dim_id, value in values.items():
        if value is not None and dim_id not in provenance:
            provenance[dim_id] = source_prov

    record = AnnotationRecord(
        book_id=book.book_id,
        values=values,
        provenance=provenance,
        found_sources=research.report.found_on,
        schema_version=schema.version,
    )
    return record, research.report


def run_annotation(backend: AnnotationBackend, books: Sequence[RatedBook],
                   schema: AnnotationSchema, *,
                   store: RecordStore | None = None,
                   parallelism: int = 1,
                   seed_values: Mapping[str, Mapping[str, float]] | None = None,
                   comment_files: Mapping[str, Sequence[str]] | None = None,
                   mock_provenance: bool = False,
                   ) -> tuple[list[AnnotationRecord], RunReport]:
    """Annotate every book, resumably.

    Books already present in ``store`` are skipped without backend calls. A
    single NotDocumented book is reported, never aborts the run. Results are
    merged in book_id order regardless of completion order.
    """
    if not books:
        raise ValueError("books must be non-empty")
    report = RunReport(total=len(books))
    reports: dict[str, SourceReport] = {}
    fresh: dict[str, AnnotationRecord] = {}
    lock = threading.Lock()

    def work(book: RatedBook) -> None:
        seeds = (seed_values or {}).get(book.book_id)
        supplied = (comment_files or {}).get(book.book_id)
        try:
            record, source_report = annotate_one(
                backend, book, schema, seed_values=seeds,
                comments_override=supplied,
                mock_provenance=mock_provenance)
        except NotDocumented as err:
            with lock:
                report.failures[book.book_id] = str(err)
            return
        with lock:
            fresh[book.book_id] = record
            reports[book.book_id] = source_report

    todo = [b for b in books if store is None or b.book_id not in store]
    report.skipped_cached = len(books) - len(todo)
    if parallelism > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            list(pool.map(work, todo))
    else:
        for book in todo:
            work(book)

    # Deterministic merge: persist fresh records in book_id order.
    for book_id in sorted(fresh):
        if store is not None:
            store.add(fresh[book_id])
    if store is not None:
        known = {b.book_id for b in books}
        records = [r for r in store.records() if r.book_id in known]
    else:
        records = [fresh[k] for k in sorted(fresh)]

    report.annotated = len(records)
    report.coverage = _coverage_counts(reports)
    return records, report
