from .config import Config, make_backend
from .project import (
    CorruptProject,
    Event,
    ExpectationsLocked,
    Project,
    ProjectLocked,
    ProjectLockFile,
    UnknownDimension,
    VersionTooNew,
    append_event,
    load_project,
    mark_effects_viewed,
    new_project,
    register_expectations,
    save_project,
    set_mask,
)
from .server import BindError, create_app, serve
