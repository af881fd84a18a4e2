"""Project persistence: diffable files under one directory, an append-only
event log, crash-safe writes, and the pre-registration lock on expectations."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Mapping, Sequence

from ..core import AnnotationRecord, AnnotationSchema, MediaType, RatedBook, default_schema
from ..recommend import CurationMask
from ..stats import Expectation, ExpectationSet

FORMAT_VERSION = 1

EVENT_EXPECTATIONS_REGISTERED = "expectations_registered"
EVENT_EFFECTS_VIEWED = "effects_viewed"
EVENT_MASK_CHANGED = "mask_changed"
EVENT_RECOMMENDATIONS_GENERATED = "recommendations_generated"
EVENT_RATINGS_UPLOADED = "ratings_uploaded"
EVENT_ANNOTATIONS_RUN = "annotations_run"


class CorruptProject(Exception):
    """A project file failed its checksum or structural validation."""


class VersionTooNew(Exception):
    """The project was written by a newer format than this build supports."""


class ExpectationsLocked(Exception):
    """Effects were already viewed; registration needs the explicit post-hoc flag."""


class UnknownDimension(KeyError):
    """An expectation or mask names a dimension not in the schema."""


class ProjectLocked(Exception):
    """Another process holds the project's advisory write lock."""


@dataclass(frozen=True)
class Event:
    kind: str
    at: str  # ISO-8601, strictly increasing within a log
    payload: Mapping = field(default_factory=dict)
    idem: str | None = None

    def to_json(self) -> str:
        body = {"at": self.at, "kind": self.kind, "payload": dict(self.payload)}
        if self.idem is not None:
            body["idem"] = self.idem
        return json.dumps(body, sort_keys=True, separators=(",", ":"))


@dataclass
class Project:
    root: Path
    schema: AnnotationSchema
    books: list[RatedBook] = field(default_factory=list)
    records: dict[str, AnnotationRecord] = field(default_factory=dict)
    expectations: ExpectationSet | None = None
    mask: CurationMask | None = None
    meta_seeds: dict[str, dict[str, float]] = field(default_factory=dict)
    events: list[Event] = field(default_factory=list)

    @property
    def effects_viewed(self) -> bool:
        return lock_state(self.events)

    def record_list(self) -> list[AnnotationRecord]:
        return [self.records[k] for k in sorted(self.records)]


def lock_state(events: Sequence[Event]) -> bool:
    """Replay the event log: expectations lock the first time effects are viewed."""
    return any(e.kind == EVENT_EFFECTS_VIEWED for e in events)


def new_project(root: str | Path, schema: AnnotationSchema | None = None) -> Project:
    project = Project(root=Path(root), schema=schema or default_schema())
    save_project(project)
    return project


# -- serialization ------------------------------------------------------------

_RATINGS_COLUMNS = ("title", "author", "rating", "percentile", "dnf",
                    "hypothetical", "media_type", "weight", "journal_note")


def _ratings_text(books: Sequence[RatedBook]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_RATINGS_COLUMNS)
    for b in books:
        w.writerow([
            b.title, b.author, repr(float(b.raw_rating)),
            "" if b.percentile is None else repr(float(b.percentile)),
            int(b.dnf), int(b.hypothetical), b.media_type.value,
            repr(float(b.weight)), b.journal_note or "",
        ])
    return buf.getvalue()


def _parse_ratings_text(text: str, path: str) -> list[RatedBook]:
    books = []
    for row in csv.DictReader(io.StringIO(text)):
        if row.get("title") is None:
            raise CorruptProject(f"{path}: missing ratings header")
        books.append(RatedBook.create(
            row["title"], row["author"], float(row["rating"]),
            percentile=float(row["percentile"]) if row["percentile"] else None,
            dnf=row["dnf"] == "1",
            hypothetical=row["hypothetical"] == "1",
            media_type=MediaType(row["media_type"]),
            weight=float(row["weight"]),
            journal_note=row["journal_note"] or None,
        ))
    return books


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write_tmp(path: Path, data: str) -> Path:
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    return tmp


def save_project(project: Project) -> None:
    """Write every snapshot file crash-safely.

    All files are staged as temporaries, the manifest (with checksums) is
    renamed into place as the commit point, then the data files are renamed.
    A crash anywhere leaves either the old state or a recoverable new state;
    load_project completes interrupted renames from the staged temporaries.
    The event log is append-mode and never rewritten here.
    """
    root = project.root
    root.mkdir(parents=True, exist_ok=True)

    from ..annotate.runner import record_to_json

    files: dict[str, str] = {
        "schema.json": project.schema.to_json() + "\n",
        "ratings.csv": _ratings_text(project.books),
    }
    if project.expectations is not None:
        files["expectations.json"] = json.dumps(
            project.expectations.to_dict(), indent=2, sort_keys=True) + "\n"
    if project.mask is not None:
        files["mask.json"] = json.dumps(
            project.mask.to_dict(), indent=2, sort_keys=True) + "\n"
    if project.meta_seeds:
        files["meta_seeds.json"] = json.dumps(
            project.meta_seeds, indent=2, sort_keys=True) + "\n"

    staged: dict[str, Path] = {}
    for name, data in files.items():
        staged[name] = _write_tmp(root / name, data)

    # records.jsonl is an append-mode store; rewrite it canonically but keep
    # it out of the manifest so mid-annotation appends stay loadable.
    records_text = "".join(record_to_json(r) + "\n" for r in project.record_list())
    records_tmp = _write_tmp(root / "records.jsonl", records_text)

    manifest = {
        "format_version": FORMAT_VERSION,
        "files": {name: _sha256(data.encode("utf-8")) for name, data in files.items()},
    }
    manifest_tmp = _write_tmp(root / "manifest.json",
                              json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    manifest_tmp.replace(root / "manifest.json")  # commit point

    for name, tmp in staged.items():
        tmp.replace(root / name)
    records_tmp.replace(root / "records.jsonl")
    (root / "events.log").touch(exist_ok=True)


def _read_with_recovery(root: Path, name: str, checksum: str) -> str:
    """Read a checksummed file, completing an interrupted rename if needed."""
    path = root / name
    tmp = root / (name + ".tmp")
    if path.exists():
        data = path.read_bytes()
        if _sha256(data) == checksum:
            return data.decode("utf-8")
    if tmp.exists():
        data = tmp.read_bytes()
        if _sha256(data) == checksum:
            tmp.replace(path)
            return data.decode("utf-8")
    if not path.exists():
        raise CorruptProject(f"{name}: file missing and no recoverable staged copy")
    raise CorruptProject(f"{name}: checksum mismatch")


def _read_events(path: Path) -> list[Event]:
    if not path.exists():
        return []
    events: list[Event] = []
    raw = path.read_text(encoding="utf-8")
    lines = raw.split("\n")
    torn_tail = lines and lines[-1] != ""
    body = lines[:-1]
    for lineno, line in enumerate(body, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as err:
            raise CorruptProject(f"events.log: bad event at line {lineno}: {err}")
        events.append(Event(kind=obj["kind"], at=obj["at"],
                            payload=obj.get("payload", {}), idem=obj.get("idem")))
    if torn_tail:
        # A kill mid-append can leave a final line without its newline; the
        # write never committed, so drop it rather than fail the whole log.
        import logging
        logging.getLogger(__name__).warning(
            "events.log: dropping torn final line (interrupted append)")
    return events


def load_project(root: str | Path) -> Project:
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise CorruptProject(f"{root}: no manifest.json; not a project directory")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise CorruptProject(f"manifest.json: {err}")
    if manifest.get("format_version", 0) > FORMAT_VERSION:
        raise VersionTooNew(
            f"project format {manifest['format_version']} is newer than "
            f"supported {FORMAT_VERSION}")

    file_hashes: Mapping[str, str] = manifest.get("files", {})
    texts = {name: _read_with_recovery(root, name, checksum)
             for name, checksum in file_hashes.items()}

    schema = AnnotationSchema.from_json(texts["schema.json"])
    books = _parse_ratings_text(texts["ratings.csv"], "ratings.csv")
    expectations = None
    if "expectations.json" in texts:
        expectations = ExpectationSet.from_dict(json.loads(texts["expectations.json"]))
    mask = None
    if "mask.json" in texts:
        mask = CurationMask.from_dict(json.loads(texts["mask.json"]))
    meta_seeds = json.loads(texts.get("meta_seeds.json", "{}"))

    from ..annotate.runner import record_from_json

    records: dict[str, AnnotationRecord] = {}
    records_path = root / "records.jsonl"
    if records_path.exists():
        for lineno, line in enumerate(
                records_path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                record = record_from_json(line, lineno=lineno)
            except ValueError as err:
                raise CorruptProject(f"records.jsonl: {err}")
            records[record.book_id] = record

    events = _read_events(root / "events.log")
    project = Project(root=root, schema=schema, books=books, records=records,
                      expectations=expectations, mask=mask,
                      meta_seeds=meta_seeds, events=events)
    if project.expectations is not None and project.effects_viewed:
        project.expectations = replace(project.expectations, locked=True)
    return project


# -- events and the pre-registration lock -------------------------------------

def _format_stamp(dt: datetime) -> str:
    return dt.strftime("%Y-%m-%dT%H:%M:%S.%f") + "Z"


def _next_timestamp(events: Sequence[Event]) -> str:
    now = datetime.now(timezone.utc).replace(tzinfo=None)
    stamp = _format_stamp(now)
    if events and stamp <= events[-1].at:
        # Force strict ordering when the clock has not advanced.
        prev = datetime.strptime(events[-1].at, "%Y-%m-%dT%H:%M:%S.%fZ")
        stamp = _format_stamp(prev + timedelta(microseconds=1))
    return stamp


def append_event(project: Project, kind: str, payload: Mapping | None = None,
                 idem: str | None = None) -> Event:
    event = Event(kind=kind, at=_next_timestamp(project.events),
                  payload=payload or {}, idem=idem)
    path = project.root / "events.log"
    project.root.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as fh:
        fh.write(event.to_json() + "\n")
        fh.flush()
        os.fsync(fh.fileno())
    project.events.append(event)
    return event


def register_expectations(project: Project, expectations: Mapping[str, Expectation],
                          post_hoc: bool = False,
                          idem: str | None = None) -> ExpectationSet:
    """Store the reader's pre-registered expectations.

    After effects have been viewed, registration is rejected unless the caller
    passes the explicit post-hoc flag, in which case the set is stored but
    permanently labeled post-hoc in every output.
    """
    unknown = [d for d in expectations if d not in project.schema]
    if unknown:
        raise UnknownDimension(f"unknown dimensions: {sorted(unknown)}")
    locked = project.effects_viewed
    if locked and not post_hoc:
        raise ExpectationsLocked(
            "effects were already viewed; pass the post-hoc flag to store anyway")
    stamp = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    expectation_set = ExpectationSet(
        by_dimension=dict(expectations),
        registered_at=stamp,
        locked=locked,
        post_hoc=post_hoc or (locked and post_hoc),
    )
    project.expectations = expectation_set
    append_event(project, EVENT_EXPECTATIONS_REGISTERED,
                 {"n_dimensions": len(expectations), "post_hoc": expectation_set.post_hoc},
                 idem=idem)
    save_project(project)
    return expectation_set


def mark_effects_viewed(project: Project, idem: str | None = None) -> None:
    append_event(project, EVENT_EFFECTS_VIEWED, idem=idem)
    if project.expectations is not None:
        project.expectations = replace(project.expectations, locked=True)


def set_mask(project: Project, mask: CurationMask, idem: str | None = None) -> None:
    mask.validate_against(project.schema)
    project.mask = mask
    append_event(project, EVENT_MASK_CHANGED,
                 {"excluded": sorted(mask.excluded)}, idem=idem)
    save_project(project)


class ProjectLockFile:
    """Advisory single-writer lock: one mutating process per project."""

    def __init__(self, root: str | Path):
        self.path = Path(root) / ".lock"
        self._held = False

    def acquire(self) -> "ProjectLockFile":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            holder = self.path.read_text(encoding="utf-8").strip()
            if holder.isdigit() and not _pid_alive(int(holder)):
                self.path.unlink()  # stale lock from a dead process
                return self.acquire()
            raise ProjectLocked(f"project locked by pid {holder or '?'}")
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        self._held = True
        return self

    def release(self) -> None:
        if self._held and self.path.exists():
            self.path.unlink()
        self._held = False

    def __enter__(self) -> "ProjectLockFile":
        return self.acquire()

    def __exit__(self, *exc) -> None:
        self.release()


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except OSError:
        return False
    return True
