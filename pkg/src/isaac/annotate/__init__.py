from .backends import (
    API_KEY_ENV,
    AnnotationBackend,
    BackendUnavailable,
    LiveBackend,
    MalformedResponse,
    MockBackend,
    MockPlan,
    NotDocumented,
    RateLimiter,
    ResearchResult,
    SourceReport,
)
from .runner import (
    COERCION_VERSION,
    load_comment_files,
    CommentBatch,
    NoComments,
    RecordStore,
    RunReport,
    annotate_dimensions,
    annotate_notes,
    annotate_one,
    classify_comments,
    coerce_value,
    record_from_json,
    record_to_json,
    research_book,
    run_annotation,
)

__all__ = [
    "API_KEY_ENV",
    "AnnotationBackend",
    "BackendUnavailable",
    "COERCION_VERSION",
    "CommentBatch",
    "LiveBackend",
    "MalformedResponse",
    "MockBackend",
    "MockPlan",
    "NoComments",
    "NotDocumented",
    "RateLimiter",
    "RecordStore",
    "ResearchResult",
    "RunReport",
    "SourceReport",
    "annotate_dimensions",
    "annotate_notes",
    "annotate_one",
    "classify_comments",
    "coerce_value",
    "load_comment_files",
    "record_from_json",
    "record_to_json",
    "research_book",
    "run_annotation",
]
