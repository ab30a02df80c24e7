"""Client for the concept-parsing, prompt-rewrite, stimulus and embedding calls.

Every model reply is validated before it is returned.  A reply that fails
validation is sent back to the model with a short repair note, up to
``max_retries`` times.  Transport failures that look transient (timeouts,
429, 5xx) are retried separately with exponential backoff.
"""

from __future__ import annotations

import base64
import logging
import mimetypes
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from ..dictionary import dedupe_stimuli, normalize_stimulus
from ..errors import (
    DimensionDrift,
    EmptyInput,
    MalformedResponse,
    TransportError,
    ValidationError,
    ValidationFailed,
)
from ..store import EmbeddingCache
from . import templates
from .parsing import bracketed_span, extract_string_list, strip_reply
from .transport import HttpTransport, Transport

log = logging.getLogger(__name__)

MIN_CONCEPTS = 15
MIN_STIMULI = 30
CHAT_PATH = "chat/completions"
EMBED_PATH = "embeddings"
BACKOFF_BASE = 1.0
BACKOFF_JITTER = 0.2
EMBED_BATCH = 64


@dataclass(frozen=True)
class ClientConfig:
    endpoint_url: str
    model_name: str
    api_key_env: str = "OPENAI_API_KEY"
    max_retries: int = 3
    request_timeout: float = 60.0
    max_concurrent_requests: int = 4
    supports_images: bool = True

    def __post_init__(self):
        if not self.endpoint_url:
            raise ValidationError("endpoint_url must be set")
        if not self.model_name:
            raise ValidationError("model_name must be set")
        if self.max_retries < 0:
            raise ValidationError(f"max_retries must be >= 0, got {self.max_retries}")
        if not self.request_timeout > 0:
            raise ValidationError(f"request_timeout must be > 0, got {self.request_timeout}")
        if self.max_concurrent_requests < 1:
            raise ValidationError(f"max_concurrent_requests must be >= 1, got {self.max_concurrent_requests}")


@dataclass(frozen=True)
class EditTask:
    """One editing task: prompts, focused concepts and an optional image.

    Empty concept fields are filled from the single ``[...]`` span of the
    matching prompt, when there is one.
    """

    source_prompt: str
    target_prompt: str
    source_concept: str = ""
    target_concept: str = ""
    image_path: str | None = None

    def __post_init__(self):
        src_span = bracketed_span(self.source_prompt)
        tgt_span = bracketed_span(self.target_prompt)
        if not self.source_concept and src_span:
            object.__setattr__(self, "source_concept", src_span)
        if not self.target_concept and tgt_span:
            object.__setattr__(self, "target_concept", tgt_span)

    @classmethod
    def from_dict(cls, d: dict) -> "EditTask":
        def pick(*keys, default=""):
            for k in keys:
                if d.get(k) is not None:
                    return d[k]
            return default

        source = pick("source_prompt", "original_prompt")
        target = pick("target_prompt", "editing_prompt")
        if not isinstance(source, str) or not isinstance(target, str):
            raise ValidationError("task needs string source_prompt and target_prompt")
        image = pick("image_path", "image", default=None)
        return cls(
            source,
            target,
            str(pick("source_concept")),
            str(pick("target_concept")),
            str(image) if image else None,
        )

    def to_dict(self) -> dict:
        return {
            "source_prompt": self.source_prompt,
            "target_prompt": self.target_prompt,
            "source_concept": self.source_concept,
            "target_concept": self.target_concept,
            "image_path": self.image_path,
        }


def _casefold(s: str) -> str:
    return normalize_stimulus(s).casefold()


@dataclass(frozen=True)
class ConceptListResponse:
    concepts: tuple[str, ...]
    source_concept: str
    target_concept: str = ""

    def __post_init__(self):
        c = tuple(self.concepts)
        object.__setattr__(self, "concepts", c)
        if len(c) < MIN_CONCEPTS:
            raise ValidationFailed(f"concept list has {len(c)} unique entries, need at least {MIN_CONCEPTS}")
        if len({_casefold(x) for x in c}) != len(c):
            raise ValidationFailed("concept list entries must be unique")
        if _casefold(c[0]) != _casefold(self.source_concept):
            raise ValidationFailed(f"first concept must be {self.source_concept!r}, got {c[0]!r}")
        if self.target_concept and _casefold(self.target_concept) in {_casefold(x) for x in c}:
            raise ValidationFailed(f"target concept {self.target_concept!r} must not appear in the list")


@dataclass(frozen=True)
class StimulusSetResponse:
    concept: str
    stimuli: tuple[str, ...]

    def __post_init__(self):
        s = tuple(self.stimuli)
        object.__setattr__(self, "stimuli", s)
        if not all(x.strip() for x in s):
            raise ValidationFailed("stimuli must be non-empty")
        if len(set(s)) != len(s):
            raise ValidationFailed("stimuli must be unique")
        if len(s) < MIN_STIMULI:
            raise ValidationFailed(f"{len(s)} unique stimuli for {self.concept!r}, need at least {MIN_STIMULI}")


def _unique(items) -> list[str]:
    seen, out = set(), []
    for x in items:
        x = normalize_stimulus(x)
        key = x.casefold()
        if x and key not in seen:
            seen.add(key)
            out.append(x)
    return out


class MiningClient:
    """Thread-safe client; at most ``max_concurrent_requests`` calls are in flight."""

    def __init__(
        self,
        cfg: ClientConfig,
        transport: Transport | None = None,
        cache: EmbeddingCache | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        self.cfg = cfg
        self.transport = transport or HttpTransport(cfg.endpoint_url, cfg.api_key_env, cfg.request_timeout)
        self.cache = cache
        self._memory: dict[tuple[str, str], np.ndarray] = {}
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._sem = threading.BoundedSemaphore(cfg.max_concurrent_requests)
        self._lock = threading.Lock()
        self.requests_sent = 0
        self._in_flight = 0
        self.peak_in_flight = 0

    # -- transport with backoff ---------------------------------------------

    def backoff_delay(self, attempt: int) -> float:
        with self._lock:
            jitter = self._rng.uniform(1 - BACKOFF_JITTER, 1 + BACKOFF_JITTER)
        return BACKOFF_BASE * 2**attempt * jitter

    def _send(self, path: str, body: dict) -> dict:
        attempt = 0
        while True:
            with self._sem:
                with self._lock:
                    self.requests_sent += 1
                    self._in_flight += 1
                    self.peak_in_flight = max(self.peak_in_flight, self._in_flight)
                try:
                    return self.transport.send(path, body)
                except TransportError as exc:
                    if not exc.retryable or attempt >= self.cfg.max_retries:
                        raise
                    err = exc
                finally:
                    with self._lock:
                        self._in_flight -= 1
            delay = self.backoff_delay(attempt)
            log.warning("transient failure (%s), retrying in %.2fs", err, delay)
            self._sleep(delay)
            attempt += 1

    # -- chat plumbing ------------------------------------------------------

    def chat_body(self, messages: list[dict]) -> dict:
        return {"model": self.cfg.model_name, "messages": messages, "temperature": 0}

    def _user_message(self, text: str, image_path: str | None) -> dict:
        if image_path is None:
            return {"role": "user", "content": text}
        path = Path(image_path)
        if not path.is_file():
            raise ValidationError(f"image file not found: {image_path}")
        mime = mimetypes.guess_type(path.name)[0] or "image/png"
        data = base64.b64encode(path.read_bytes()).decode("ascii")
        return {
            "role": "user",
            "content": [
                {"type": "text", "text": text},
                {"type": "image_url", "image_url": {"url": f"data:{mime};base64,{data}"}},
            ],
        }

    def _image_slot(self, task: EditTask) -> tuple[str, str | None]:
        if task.image_path is None:
            return templates.NO_IMAGE, None
        if not self.cfg.supports_images:
            log.warning("endpoint does not accept images; sending prompts only for %s", task.image_path)
            return templates.NO_IMAGE, None
        return templates.IMAGE_MARKER, task.image_path

    def _chat(self, messages: list[dict]) -> str:
        reply = self._send(CHAT_PATH, self.chat_body(messages))
        try:
            content = reply["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse("reply has no choices[0].message.content") from exc
        if not isinstance(content, str):
            raise MalformedResponse("reply content is not a string")
        return content

    def _validated(self, messages: list[dict], validate: Callable[[str], object], what: str):
        history = list(messages)
        last: ValidationFailed | None = None
        for attempt in range(self.cfg.max_retries + 1):
            content = self._chat(history)
            try:
                return validate(content), history, content
            except ValidationFailed as exc:
                last = exc
                log.info("%s reply rejected on attempt %d: %s", what, attempt + 1, exc)
                history = history + [
                    {"role": "assistant", "content": content},
                    {"role": "user", "content": templates.repair_message(str(exc))},
                ]
        raise type(last)(f"{what}: no valid reply after {self.cfg.max_retries + 1} attempts; last error: {last}")

    # -- request builders (also used for dry runs) --------------------------

    def _source_concept(self, task: EditTask) -> str:
        if not task.source_concept:
            raise ValidationError(
                "task has no source concept; run rewrite_for_insertion first to pick a counterpart"
            )
        return task.source_concept

    def parse_messages(self, task: EditTask) -> list[dict]:
        source = self._source_concept(task)
        marker, image = self._image_slot(task)
        text = templates.render(
            templates.CONCEPT_LIST,
            task.source_prompt,
            task.target_prompt,
            templates.quoted(source),
            templates.quoted(task.target_concept),
            marker,
        )
        return [self._user_message(text, image)]

    def rewrite_messages(self, task: EditTask) -> list[dict]:
        if task.source_concept:
            raise ValidationError("rewrite applies to tasks without a source concept")
        if not task.target_concept:
            raise ValidationError("rewrite needs a target concept")
        marker, image = self._image_slot(task)
        text = templates.render(
            templates.REWRITE_FOR_INSERTION,
            task.source_prompt,
            task.target_prompt,
            templates.quoted(""),
            templates.quoted(task.target_concept),
            marker,
        )
        return [self._user_message(text, image)]

    def stimuli_messages(self, concept: str) -> list[dict]:
        if not concept or not concept.strip():
            raise ValidationError("concept name must be non-empty")
        return [{"role": "user", "content": templates.render(templates.STIMULI, concept.strip())}]

    def embed_body(self, texts: list[str]) -> dict:
        return {"model": self.cfg.model_name, "input": list(texts)}

    # -- operations ---------------------------------------------------------

    def parse_concepts(self, task: EditTask) -> ConceptListResponse:
        messages = self.parse_messages(task)
        source, target = task.source_concept, task.target_concept

        def validate(content: str) -> ConceptListResponse:
            items = _unique(extract_string_list(content))
            if items and _casefold(items[0]) == _casefold(source):
                items[0] = source
            return ConceptListResponse(tuple(items), source, target)

        return self._validated(messages, validate, "concept list")[0]

    def rewrite_for_insertion(self, task: EditTask) -> EditTask:
        messages = self.rewrite_messages(task)
        target = task.target_concept

        def validate(content: str) -> EditTask:
            text = strip_reply(content, "Re-written Source Prompt:")
            try:
                span = bracketed_span(text)
            except ValidationError as exc:
                raise ValidationFailed(str(exc)) from None
            if not span:
                raise ValidationFailed("rewritten prompt has no bracketed source concept")
            if _casefold(span) == _casefold(target):
                raise ValidationFailed(f"counterpart {span!r} must differ from the target concept")
            return EditTask(text, task.target_prompt, span, target, task.image_path)

        return self._validated(messages, validate, "rewrite")[0]

    def synthesize_stimuli(self, concept: str) -> StimulusSetResponse:
        messages = self.stimuli_messages(concept)
        concept = concept.strip()
        stimuli, history, content = self._validated(
            messages, lambda c: dedupe_stimuli(extract_string_list(c)), "stimuli"
        )
        if len(stimuli) < MIN_STIMULI:
            log.info("%d unique stimuli for %r; asking for more", len(stimuli), concept)
            follow = history + [
                {"role": "assistant", "content": content},
                {"role": "user", "content": templates.top_up_message(len(stimuli), MIN_STIMULI - len(stimuli))},
            ]
            try:
                extra = extract_string_list(self._chat(follow))
            except MalformedResponse as exc:
                raise ValidationFailed(f"stimuli top-up for {concept!r} was unparseable: {exc}") from None
            stimuli = dedupe_stimuli(list(stimuli) + extra)
        return StimulusSetResponse(concept, tuple(stimuli))

    def synthesize_many(self, concepts) -> list[StimulusSetResponse]:
        concepts = list(concepts)
        with ThreadPoolExecutor(max_workers=self.cfg.max_concurrent_requests) as pool:
            return list(pool.map(self.synthesize_stimuli, concepts))

    def _cached(self, text: str):
        key = (self.cfg.model_name, text)
        if key in self._memory:
            return self._memory[key]
        if self.cache is not None:
            vec = self.cache.get(self.cfg.model_name, text)
            if vec is not None:
                self._memory[key] = vec
            return vec
        return None

    def _store(self, text: str, vec: np.ndarray) -> None:
        self._memory[(self.cfg.model_name, text)] = vec
        if self.cache is not None:
            self.cache.put(self.cfg.model_name, text, vec)

    def _fetch_embeddings(self, texts: list[str]) -> list[np.ndarray]:
        reply = self._send(EMBED_PATH, self.embed_body(texts))
        try:
            data = sorted(reply["data"], key=lambda item: item["index"])
            vecs = [np.asarray(item["embedding"], dtype=np.float32).reshape(-1) for item in data]
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedResponse("embedding reply has no data[].embedding") from exc
        if len(vecs) != len(texts):
            raise MalformedResponse(f"asked for {len(texts)} embeddings, got {len(vecs)}")
        return vecs

    def embed_texts(self, texts) -> np.ndarray:
        """Embed ``texts`` into a K x d float32 matrix, one row per text in order."""
        texts = list(texts)
        if not texts:
            raise EmptyInput("no texts to embed")
        rows: dict[str, np.ndarray] = {}
        missing = []
        for t in texts:
            if t in rows or t in missing:
                continue
            vec = self._cached(t)
            if vec is None:
                missing.append(t)
            else:
                rows[t] = vec
        for i in range(0, len(missing), EMBED_BATCH):
            chunk = missing[i : i + EMBED_BATCH]
            for t, vec in zip(chunk, self._fetch_embeddings(chunk)):
                rows[t] = vec
        dims = {v.shape[0] for v in rows.values()}
        if len(dims) != 1:
            raise DimensionDrift(f"embedding widths differ within one batch: {sorted(dims)}")
        for t in missing:
            if not np.isfinite(rows[t]).all():
                raise MalformedResponse(f"embedding for {t!r} is not finite")
            self._store(t, rows[t])
        return np.stack([rows[t] for t in texts]).astype(np.float32)


def parse_concepts(task: EditTask, cfg: ClientConfig, transport: Transport | None = None) -> ConceptListResponse:
    return MiningClient(cfg, transport).parse_concepts(task)


def rewrite_for_insertion(task: EditTask, cfg: ClientConfig, transport: Transport | None = None) -> EditTask:
    return MiningClient(cfg, transport).rewrite_for_insertion(task)


def synthesize_stimuli(concept: str, cfg: ClientConfig, transport: Transport | None = None) -> StimulusSetResponse:
    return MiningClient(cfg, transport).synthesize_stimuli(concept)


def embed_texts(texts, cfg: ClientConfig, transport: Transport | None = None, cache: EmbeddingCache | None = None):
    return MiningClient(cfg, transport, cache).embed_texts(texts)
