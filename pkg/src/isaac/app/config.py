"""Flat key=value configuration for the backend and runtime knobs.

The API key is never stored here; it comes from the ISAAC_API_KEY
environment variable only.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class Config:
    backend: str = "mock"  # mock | live
    endpoint: str = "https://api.perplexity.ai/chat/completions"
    model: str = "sonar"
    requests_per_minute: int = 20
    parallelism: int = 1
    seed: int = 0
    forest_trees: int = 100

    @classmethod
    def load(cls, path: str | Path) -> "Config":
        values: dict[str, str] = {}
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip().strip('"')
        kwargs = {}
        for field_name, caster in (
            ("backend", str), ("endpoint", str), ("model", str),
            ("requests_per_minute", int), ("parallelism", int), ("seed", int),
            ("forest_trees", int),
        ):
            if field_name in values:
                kwargs[field_name] = caster(values.pop(field_name))
        if values:
            raise ValueError(f"{path}: unknown config keys {sorted(values)}")
        return cls(**kwargs)


def make_backend(config: Config):
    from ..annotate import LiveBackend, MockBackend

    if config.backend == "mock":
        return MockBackend()
    if config.backend == "live":
        return LiveBackend(endpoint=config.endpoint, model=config.model,
                           requests_per_minute=config.requests_per_minute)
    raise ValueError(f"unknown backend {config.backend!r}")
