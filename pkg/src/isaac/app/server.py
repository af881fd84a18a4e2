"""JSON-over-HTTP service consumed by the browser UI.

Every state-changing request appends to the project's event log; mutations
run one at a time behind a lock and are idempotent under retry with the same
Idempotency-Key header. Payload schemas are documented in docs/api.md.
"""

from __future__ import annotations

import io
import socket
import tempfile
import threading
from pathlib import Path
from typing import Any, Callable

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import ingest
from ..annotate import NotDocumented, run_annotation
from ..core import RatedBook
from ..recommend import (
    AlreadyRated,
    CandidateBook,
    CurationMask,
    NoModel,
    SchemaVersionMismatch,
    exploration_rank,
    rank_candidates,
)
from ..predict import ModelKind, ModelSpec, TooFewBooks, loocv
from ..stats import (
    Expectation,
    NothingComparable,
    concordance,
    effect_table,
    effects_rows,
)
from .config import Config, make_backend
from .project import (
    EVENT_ANNOTATIONS_RUN,
    EVENT_RATINGS_UPLOADED,
    EVENT_RECOMMENDATIONS_GENERATED,
    ExpectationsLocked,
    Project,
    UnknownDimension,
    append_event,
    load_project,
    mark_effects_viewed,
    register_expectations,
    save_project,
    set_mask,
)



class BindError(OSError):
    """The requested address cannot be bound."""


def _error(status: int, name: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": name, "detail": detail})


_ERROR_STATUS: list[tuple[type[Exception], int]] = [
    (ExpectationsLocked, 409),
    (AlreadyRated, 409),
    (UnknownDimension, 400),
    (SchemaVersionMismatch, 409),
    (NoModel, 409),
    (NothingComparable, 409),
    (TooFewBooks, 409),
    (NotDocumented, 422),
    (ingest.FormatError, 400),
    (ingest.EmptyFile, 400),
    (KeyError, 400),
    (ValueError, 400),
]


class ServerState:
    def __init__(self, project: Project, config: Config):
        self.project = project
        self.config = config
        self.backend = make_backend(config)
        self.mutate_lock = threading.Lock()
        self.idem_cache: dict[str, dict] = {}
        self.model_reports: dict[str, dict] = {}

    def invalidate_models(self) -> None:
        self.model_reports.clear()


def create_app(project_root: str | Path, config: Config | None = None) -> FastAPI:
    config = config or Config()
    project = load_project(project_root)
    state = ServerState(project, config)
    app = FastAPI(title="isaac", docs_url=None, redoc_url=None)
    app.state.isaac = state

    def mutation(request: Request, apply: Callable[[], dict],
                 status: int = 200) -> JSONResponse:
        """Serialize writes; replay cached responses for repeated idempotency keys."""
        key = request.headers.get("Idempotency-Key")
        with state.mutate_lock:
            if key and key in state.idem_cache:
                return JSONResponse(status_code=200, content=state.idem_cache[key])
            try:
                body = apply()
            except Exception as err:  # mapped to machine-readable errors below
                for exc_type, code in _ERROR_STATUS:
                    if isinstance(err, exc_type):
                        return _error(code, type(err).__name__, str(err))
                raise
            if key:
                state.idem_cache[key] = body
            return JSONResponse(status_code=status, content=body)

    @app.get("/api/project")
    def get_project() -> dict:
        p = state.project
        return {
            "schema_version": p.schema.version,
            "n_books": len(p.books),
            "n_records": len(p.records),
            "expectations_locked": p.effects_viewed,
            "expectations_registered": p.expectations is not None,
            "expectations_post_hoc": bool(p.expectations.post_hoc) if p.expectations else False,
            "mask": p.mask.to_dict() if p.mask else {"excluded": []},
            "n_events": len(p.events),
            "dimensions": [
                {"id": d.id, "label": d.label, "group": d.group.value,
                 "kind": d.kind.value}
                for d in p.schema.dimensions
            ],
        }

    def _parse_uploaded_books(payload: dict) -> list[RatedBook]:
        if "csv" in payload:
            with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False) as fh:
                fh.write(payload["csv"])
                tmp = fh.name
            fmt = payload.get("format")
            file = ingest.RatingsFile.open(tmp, None if fmt in (None, "auto") else fmt)
            return ingest.parse_ratings_export(file)
        books = []
        for row in payload.get("rows", []):
            books.append(RatedBook.create(
                row["title"], row["author"], float(row["rating"]),
                dnf=bool(row.get("dnf", False)),
                hypothetical=bool(row.get("hypothetical", False)),
                media_type=ingest.MediaType(row.get("media_type", "book")),
            ))
        return books

    @app.post("/api/ratings")
    async def post_ratings(request: Request) -> JSONResponse:
        payload = await request.json()

        def apply() -> dict:
            p = state.project
            incoming = _parse_uploaded_books(payload)
            known = {b.book_id for b in p.books}
            fresh = [b for b in incoming if b.book_id not in known]
            merged = list(p.books) + fresh
            p.books = ingest.apply_percentiles(merged) if merged else []
            append_event(p, EVENT_RATINGS_UPLOADED, {"added": len(fresh)})
            save_project(p)
            state.invalidate_models()
            return {"added": len(fresh), "total": len(p.books),
                    "books": [{"book_id": b.book_id, "title": b.title,
                               "author": b.author, "rating": b.raw_rating,
                               "hypothetical": b.hypothetical,
                               "media_type": b.media_type.value}
                              for b in p.books]}

        return mutation(request, apply)

    @app.post("/api/annotate")
    async def post_annotate(request: Request) -> JSONResponse:
        def apply() -> dict:
            p = state.project
            if not p.books:
                raise ValueError("no books to annotate; upload ratings first")
            records, report = run_annotation(
                state.backend, p.books, p.schema,
                parallelism=state.config.parallelism,
                seed_values=p.meta_seeds or None,
                mock_provenance=state.config.backend == "mock")
            p.records.update({r.book_id: r for r in records})
            append_event(p, EVENT_ANNOTATIONS_RUN, report.to_dict())
            save_project(p)
            state.invalidate_models()
            return report.to_dict()

        return mutation(request, apply)

    @app.get("/api/effects")
    def get_effects(min_n: int = 3) -> Any:
        p = state.project
        try:
            matrix = _project_matrix(p)
        except ValueError as err:
            return _error(409, "NoData", str(err))
        effects = effect_table(matrix, p.schema, expectations=p.expectations,
                               min_n=min_n)
        with state.mutate_lock:
            mark_effects_viewed(p)
        return {
            "expectations_post_hoc": bool(p.expectations.post_hoc) if p.expectations else False,
            "effects": effects_rows(effects, p.expectations),
        }

    @app.get("/api/dimension-books")
    def get_dimension_books(dimension_id: str) -> Any:
        """Books contributing to one dimension's effect estimate."""
        p = state.project
        if dimension_id not in p.schema:
            return _error(400, "UnknownDimension", dimension_id)
        titles = {b.book_id: b for b in p.books}
        books = []
        for record in p.record_list():
            value = record.values.get(dimension_id)
            book = titles.get(record.book_id)
            if value is None or book is None:
                continue
            books.append({"book_id": book.book_id, "title": book.title,
                          "author": book.author, "value": value,
                          "percentile": book.percentile})
        books.sort(key=lambda b: (-(b["value"] or 0), b["title"].lower()))
        return {"dimension_id": dimension_id, "books": books}

    @app.post("/api/expectations")
    async def post_expectations(request: Request) -> JSONResponse:
        payload = await request.json()

        def apply() -> dict:
            p = state.project
            expectations = {
                dim: Expectation(sign=int(spec["sign"]),
                                 band=tuple(spec["band"]) if spec.get("band") else None)
                for dim, spec in payload.get("expectations", {}).items()
            }
            stored = register_expectations(p, expectations,
                                           post_hoc=bool(payload.get("post_hoc", False)))
            return {"registered": len(expectations), "post_hoc": stored.post_hoc,
                    "locked": stored.locked}

        return mutation(request, apply)

    @app.get("/api/concordance")
    def get_concordance() -> Any:
        p = state.project
        if p.expectations is None:
            return _error(409, "NoExpectations", "no expectations registered")
        try:
            matrix = _project_matrix(p)
            effects = effect_table(matrix, p.schema)
            result = concordance(effects, p.expectations)
        except (ValueError, NothingComparable) as err:
            name = type(err).__name__ if isinstance(err, NothingComparable) else "NoData"
            return _error(409, name, str(err))
        return {"percent": result.percent, "matches": result.matches,
                "compared": result.compared, "verdicts": dict(result.verdicts),
                "expectations_post_hoc": p.expectations.post_hoc}

    @app.post("/api/mask")
    async def post_mask(request: Request) -> JSONResponse:
        payload = await request.json()

        def apply() -> dict:
            p = state.project
            mask = CurationMask(excluded=frozenset(payload.get("excluded", ())),
                                reasons=payload.get("reasons", {}))
            set_mask(p, mask)
            state.invalidate_models()
            return {"mask": p.mask.to_dict()}

        return mutation(request, apply)

    @app.get("/api/model-report")
    def get_model_report(model: str = "ridge") -> Any:
        p = state.project
        if model in state.model_reports:
            return state.model_reports[model]
        kind = ModelKind(model) if model != "forest" else ModelKind.RANDOM_FOREST
        spec = {
            ModelKind.RIDGE: ModelSpec.ridge(),
            ModelKind.RANDOM_FOREST: ModelSpec.forest(n_trees=state.config.forest_trees,
                                                      seed=state.config.seed),
            ModelKind.BASELINE_AVG_RATING: ModelSpec.baseline(),
        }[kind]
        try:
            matrix = _project_matrix(p, mask=p.mask)
            report = loocv(matrix, spec, seed=state.config.seed)
        except (ValueError, KeyError) as err:
            return _error(409, type(err).__name__, str(err))
        body = report.to_dict()
        body["excluded_dimensions"] = sorted(p.mask.excluded) if p.mask else []
        state.model_reports[model] = body
        return body

    def _candidates_from_payload(payload: dict) -> list[CandidateBook]:
        p = state.project
        rows: list[tuple[str, str]] = []
        if "candidates_csv" in payload:
            import csv as _csv
            for row in _csv.DictReader(io.StringIO(payload["candidates_csv"])):
                rows.append((row["title"], row["author"]))
        for row in payload.get("candidates", []):
            rows.append((row["title"], row["author"]))
        candidates = []
        for title, author in rows:
            book = RatedBook.create(title, author, 0.0)
            record, _ = _annotate_candidate(book)
            candidates.append(CandidateBook(
                book_id=book.book_id, title=title, author=author, record=record))
        return candidates

    def _annotate_candidate(book: RatedBook):
        from ..annotate import annotate_one

        return annotate_one(state.backend, book, state.project.schema,
                            mock_provenance=state.config.backend == "mock")

    def _recommend(payload: dict, mode: str) -> dict:
        p = state.project
        candidates = _candidates_from_payload(payload)
        mask = p.mask or CurationMask(excluded=frozenset())
        k = int(payload.get("k", 5))
        specs = (ModelSpec.ridge(),
                 ModelSpec.forest(n_trees=state.config.forest_trees,
                                  seed=state.config.seed))
        fn = rank_candidates if mode == "enjoyment" else exploration_rank
        result = fn(candidates, p.books, p.record_list(), p.schema, mask, k,
                    model_specs=specs, seed=state.config.seed)
        append_event(p, EVENT_RECOMMENDATIONS_GENERATED,
                     {"mode": mode, "k": k, "n_candidates": len(candidates)})
        return result.to_dict()

    @app.post("/api/recommend")
    async def post_recommend(request: Request) -> JSONResponse:
        payload = await request.json()
        return mutation(request, lambda: _recommend(payload, "enjoyment"))

    @app.post("/api/explore")
    async def post_explore(request: Request) -> JSONResponse:
        payload = await request.json()
        return mutation(request, lambda: _recommend(payload, "exploration"))

    return app


def _project_matrix(project: Project, mask: CurationMask | None = None):
    from ..core import EncodeOptions, encode_matrix

    if not project.books:
        raise ValueError("no rated books")
    books = [b for b in project.books if b.book_id in project.records]
    if not books:
        raise ValueError("no annotated books; run annotation first")
    if any(b.percentile is None for b in books):
        books = ingest.apply_percentiles(books)
    excluded = mask.excluded if mask else frozenset()
    return encode_matrix(books, project.record_list(), project.schema,
                         EncodeOptions(exclude=excluded))


def serve(project_root: str | Path, bind: str = "127.0.0.1:8000",
          config: Config | None = None) -> None:
    """Run the HTTP service until interrupted."""
    import uvicorn

    host, _, port_text = bind.partition(":")
    port = int(port_text or 8000)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as err:
        raise BindError(f"cannot bind {bind}: {err}") from err
    finally:
        probe.close()

    from .project import ProjectLockFile

    with ProjectLockFile(project_root):  # one writer per project
        app = create_app(project_root, config)
        uvicorn.run(app, host=host, port=port, log_level="info")
