"""Annotation backends: the deterministic mock and the live HTTP client."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import httpx

from ..core import Provenance
from . import prompts

logger = logging.getLogger(__name__)

API_KEY_ENV = "ISAAC_API_KEY"

#: Comments are classified in chunks of this size, one backend call per chunk.
COMMENT_CHUNK_SIZE = 20


class NotDocumented(Exception):
    """No web source documents this book; it cannot be annotated."""


class BackendUnavailable(Exception):
    """The live backend failed after retries (network or auth)."""


class MalformedResponse(Exception):
    """The backend's reply could not be parsed after retries."""


@dataclass(frozen=True)
class SourceReport:
    found_on: frozenset[str]
    urls: tuple[str, ...] = ()
    retrieved_at: str = ""

    def provenance(self) -> Provenance:
        has_wiki = "wikipedia" in self.found_on
        has_gr = "goodreads" in self.found_on
        if has_wiki and has_gr:
            return Provenance.BOTH
        if has_wiki:
            return Provenance.WIKIPEDIA
        if has_gr:
            return Provenance.GOODREADS
        return Provenance.OTHER_WEB


@dataclass(frozen=True)
class ResearchResult:
    report: SourceReport
    summary: str
    metadata: Mapping[str, object] = field(default_factory=dict)
    comments: tuple[str, ...] = ()


class AnnotationBackend(ABC):
    """Research and classification behaviors behind the annotation pipeline."""

    @abstractmethod
    def research(self, title: str, author: str) -> ResearchResult:
        """Gather sources, a prose summary, and raw metadata for one book."""

    @abstractmethod
    def classify(self, text: str, labels: Sequence[str]) -> dict[str, object]:
        """Binary labels for a single text, keyed by label."""

    def classify_many(self, texts: Sequence[str],
                      labels: Sequence[str]) -> list[dict[str, object]]:
        return [self.classify(t, labels) for t in texts]


def _hash_bit(key: str, salt: str) -> int:
    digest = hashlib.sha256(f"{key}:{salt}".encode("utf-8")).digest()
    return digest[0] & 1


def _hash_unit(key: str, salt: str) -> float:
    digest = hashlib.sha256(f"{key}:{salt}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") / 2 ** 32


@dataclass(frozen=True)
class MockPlan:
    """Planted behavior for one book in the mock backend."""

    found_on: frozenset[str] = frozenset({"wikipedia", "goodreads"})
    n_comments: int = 60


class MockBackend(AnnotationBackend):
    """Pure, deterministic backend keyed by (title, author).

    Labels are encoded as marker tokens inside the generated summary and
    comments; ``classify`` just checks for the marker. Every output is a pure
    function of its inputs, so repeated runs are byte-identical.
    """

    FIXED_TIMESTAMP = "1970-01-01T00:00:00Z"

    def __init__(self,
                 fixtures: Mapping[str, ResearchResult] | None = None,
                 plans: Mapping[str, MockPlan] | None = None):
        self.fixtures = dict(fixtures or {})
        self.plans = dict(plans or {})
        self.research_calls = 0
        self.classify_calls = 0

    def _key(self, title: str, author: str) -> str:
        return f"{title.strip().lower()}|{author.strip().lower()}"

    def research(self, title: str, author: str) -> ResearchResult:
        self.research_calls += 1
        key = self._key(title, author)
        if key in self.fixtures:
            return self.fixtures[key]
        plan = self.plans.get(key, MockPlan())
        if not plan.found_on:
            raise NotDocumented(f"{title!r} by {author!r} is not documented anywhere")

        markers = " ".join(
            f"<{salt}>" for salt in _SUMMARY_SALTS if _hash_bit(key, salt)
        )
        summary = f"Research notes for {title} by {author}. {markers}".strip()
        comments = tuple(
            self._comment(key, i) for i in range(plan.n_comments)
        )
        metadata = {
            "avg_rating": round(1.0 + 4.0 * _hash_unit(key, "avg_rating"), 2),
            "num_ratings": int(_hash_unit(key, "num_ratings") * 200_000),
            "num_pages": 80 + int(_hash_unit(key, "num_pages") * 900),
            "genres": [g for g in _MOCK_GENRES if _hash_bit(key, f"genre:{g}")],
        }
        urls = tuple(
            f"https://{src}.example/{abs(hash(key)) % 10_000}"
            for src in sorted(plan.found_on)
        )
        return ResearchResult(
            report=SourceReport(found_on=plan.found_on, urls=urls,
                                retrieved_at=self.FIXED_TIMESTAMP),
            summary=summary,
            metadata=metadata,
            comments=comments,
        )

    def _comment(self, key: str, i: int) -> str:
        markers = " ".join(
            f"<{salt}>" for salt in _COMMENT_SALTS
            if _hash_unit(f"{key}#{i}", salt) < 0.25
        )
        return f"Reader comment {i} on {key.split('|')[0]}. {markers}".strip()

    def classify(self, text: str, labels: Sequence[str]) -> dict[str, object]:
        self.classify_calls += 1
        return {label: 1 if f"<{label}>" in text else 0 for label in labels}


_MOCK_GENRES = ("fantasy", "sci-fi", "romance", "mystery", "historical",
                "literary", "thriller", "classics")

# Salts the mock plants into summaries/comments; aligned with schema dim ids.
_SUMMARY_SALTS = tuple(
    f"{prefix}_{name}"
    for prefix, names in (
        ("target", ("women", "men", "romance_lovers", "action_junkies",
                    "poetry_lovers", "scientists", "young_people", "adults",
                    "social_activists", "history_fans")),
        ("style", ("complex", "introspective", "plot_focused", "flowery",
                   "poetic", "many_characters", "funny", "experimental")),
        ("mood", ("dark", "light", "happy", "tragic", "thrilling", "serious",
                  "nostalgic", "cozy", "fearful", "thought_provoking")),
        ("mc", ("teenager", "adult", "senior", "male", "female", "minority",
                "majority", "none_clear")),
        ("theme", ("romance", "family", "war", "violence", "politics",
                   "prejudice", "solitude", "survival", "magic",
                   "personal_growth", "womens_issues", "money",
                   "coming_of_age", "academia")),
        ("goal", ("destroy_evil", "establish_relationship", "survive",
                  "political_aspiration", "professional_aspiration",
                  "solve_crime", "defeat_opponent", "inner_peace",
                  "understand_self", "protect_someone", "vengeance",
                  "forgive", "personal_growth", "escape", "none_clear")),
        ("against", ("other_character", "society", "nature", "technology",
                     "fate", "supernatural", "self")),
    )
    for name in names
)

_COMMENT_SALTS = tuple(
    f"mention_{name}" for name in (
        "good_characters", "bad_characters", "bad_writing", "good_writing",
        "good_plot", "bad_plot", "fast_pace", "slow_pace", "good_setting",
        "bad_setting", "dnf", "addictive", "intellectual",
    )
)


class RateLimiter:
    """Sliding-window request budget: at most ``per_minute`` calls in any 60s."""

    def __init__(self, per_minute: int,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if per_minute < 1:
            raise ValueError("per_minute must be >= 1")
        self.per_minute = per_minute
        self._clock = clock
        self._sleep = sleep
        self._stamps: list[float] = []
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            while True:
                now = self._clock()
                self._stamps = [t for t in self._stamps if now - t < 60.0]
                if len(self._stamps) < self.per_minute:
                    self._stamps.append(now)
                    return
                self._sleep(60.0 - (now - self._stamps[0]))


class LiveBackend(AnnotationBackend):
    """HTTP JSON client for a chat-style search-augmented model API.

    Requests POST ``{endpoint}`` with ``{"model": ..., "messages": [...]}`` and
    read ``choices[0].message.content`` from the reply. Transient failures and
    unparseable replies are retried with exponential backoff.
    """

    def __init__(self, endpoint: str, model: str, *,
                 api_key: str | None = None,
                 requests_per_minute: int = 20,
                 max_retries: int = 3,
                 timeout: float = 60.0,
                 transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep,
                 clock: Callable[[], float] = time.monotonic):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.max_retries = max_retries
        self._sleep = sleep
        self._limiter = RateLimiter(requests_per_minute, clock=clock, sleep=sleep)
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def close(self) -> None:
        self._client.close()

    def _complete(self, prompt: str) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        }
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            self._limiter.acquire()
            try:
                resp = self._client.post(self.endpoint, json=payload, headers=headers)
                if resp.status_code >= 500:
                    raise httpx.HTTPStatusError(
                        f"server error {resp.status_code}", request=resp.request,
                        response=resp)
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except (httpx.TransportError, httpx.HTTPStatusError, KeyError,
                    json.JSONDecodeError) as err:
                last_error = err
                logger.warning("backend call failed (attempt %d/%d): %s",
                               attempt + 1, self.max_retries, err)
                if attempt + 1 < self.max_retries:
                    self._sleep(2.0 ** attempt)
        raise BackendUnavailable(f"backend failed after {self.max_retries} attempts: {last_error}")

    def _complete_json(self, prompt: str) -> object:
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            text = self._complete(prompt)
            try:
                return _extract_json(text)
            except ValueError as err:
                last_error = err
                logger.warning("unparseable backend reply (attempt %d/%d): %s",
                               attempt + 1, self.max_retries, err)
                if attempt + 1 < self.max_retries:
                    self._sleep(2.0 ** attempt)
        raise MalformedResponse(f"no parseable JSON after {self.max_retries} attempts: {last_error}")

    def research(self, title: str, author: str) -> ResearchResult:
        if not title.strip() or not author.strip():
            raise ValueError("title and author must be non-empty")
        body = self._complete_json(prompts.RESEARCH_PROMPT.format(title=title, author=author))
        if not isinstance(body, dict):
            raise MalformedResponse(f"research reply is not an object: {body!r}")
        if body.get("not_found"):
            raise NotDocumented(f"{title!r} by {author!r} not found by backend")
        sources = body.get("sources") or {}
        found = set()
        if sources.get("wikipedia"):
            found.add("wikipedia")
        if sources.get("goodreads"):
            found.add("goodreads")
        urls = tuple(sources.get("other_urls") or ())
        if urls:
            found.add("other_web")
        if not found:
            raise NotDocumented(f"{title!r} by {author!r}: backend reported no sources")
        report = SourceReport(
            found_on=frozenset(found), urls=urls,
            retrieved_at=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        )
        return ResearchResult(
            report=report,
            summary=str(body.get("summary") or ""),
            metadata=body.get("metadata") or {},
            comments=tuple(body.get("comments") or ()),
        )

    def classify(self, text: str, labels: Sequence[str]) -> dict[str, object]:
        body = self._complete_json(
            prompts.CLASSIFY_PROMPT.format(labels=json.dumps(list(labels)), text=text))
        if not isinstance(body, dict):
            raise MalformedResponse(f"classify reply is not an object: {body!r}")
        return body

    def classify_many(self, texts: Sequence[str],
                      labels: Sequence[str]) -> list[dict[str, object]]:
        out: list[dict[str, object]] = []
        for start in range(0, len(texts), COMMENT_CHUNK_SIZE):
            chunk = texts[start:start + COMMENT_CHUNK_SIZE]
            numbered = "\n".join(f"{i + 1}. {t}" for i, t in enumerate(chunk))
            body = self._complete_json(prompts.CLASSIFY_MANY_PROMPT.format(
                labels=json.dumps(list(labels)), texts=numbered))
            if not isinstance(body, list) or len(body) != len(chunk):
                raise MalformedResponse(
                    f"expected a list of {len(chunk)} objects, got {type(body).__name__}")
            out.extend(body)
        return out


def _extract_json(text: str) -> object:
    """Pull the first JSON object or array out of a model reply."""
    for opener, closer in (("{", "}"), ("[", "]")):
        start = text.find(opener)
        end = text.rfind(closer)
        if start != -1 and end > start:
            try:
                return json.loads(text[start:end + 1])
            except json.JSONDecodeError:
                continue
    raise ValueError(f"no JSON found in reply: {text[:120]!r}")
