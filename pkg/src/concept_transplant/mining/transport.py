"""Request transports: live HTTP, recording and replay.

A transport sends one JSON body to a path under the service base URL and
returns the decoded JSON reply.  Recorded exchanges are stored one per file,
named by the SHA-256 of the canonical request, so replay needs no network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Protocol

import httpx

from ..errors import FixtureMissing, MissingApiKey, TransportError

log = logging.getLogger(__name__)


class Transport(Protocol):
    def send(self, path: str, body: dict) -> dict: ...


def request_key(path: str, body: dict) -> str:
    canonical = json.dumps({"path": path, "body": body}, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _retryable_status(code: int) -> bool:
    return code == 429 or code >= 500


class HttpTransport:
    """POSTs JSON to ``{base_url}/{path}`` with a bearer key from the environment.

    The key is looked up on every call so rotating it needs no restart.  It is
    never logged or included in error messages.
    """

    def __init__(self, base_url: str, api_key_env: str, timeout: float = 60.0, client: httpx.Client | None = None):
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout = timeout
        self._client = client or httpx.Client(timeout=timeout)

    def _key(self) -> str:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise MissingApiKey(f"environment variable {self.api_key_env} is not set")
        return key

    def send(self, path: str, body: dict) -> dict:
        url = f"{self.base_url}/{path.lstrip('/')}"
        headers = {"Authorization": f"Bearer {self._key()}", "Content-Type": "application/json"}
        log.debug("POST %s", url)
        try:
            resp = self._client.post(url, json=body, headers=headers, timeout=self.timeout)
        except httpx.TimeoutException as exc:
            raise TransportError(f"POST {url} timed out", retryable=True) from exc
        except httpx.HTTPError as exc:
            raise TransportError(f"POST {url} failed: {type(exc).__name__}", retryable=True) from exc
        if resp.status_code >= 400:
            raise TransportError(
                f"POST {url} returned HTTP {resp.status_code}",
                retryable=_retryable_status(resp.status_code),
                status=resp.status_code,
            )
        try:
            return resp.json()
        except ValueError as exc:
            raise TransportError(f"POST {url} returned a non-JSON body", retryable=False) from exc

    def close(self) -> None:
        self._client.close()


class RecordingTransport:
    """Forward to ``inner`` and store every successful exchange."""

    def __init__(self, inner: Transport, cassette_dir):
        self.inner = inner
        self.cassette_dir = Path(cassette_dir)

    def send(self, path: str, body: dict) -> dict:
        reply = self.inner.send(path, body)
        self.cassette_dir.mkdir(parents=True, exist_ok=True)
        record = {"path": path, "request": body, "response": reply}
        target = self.cassette_dir / f"{request_key(path, body)}.json"
        target.write_text(json.dumps(record, ensure_ascii=False, indent=1, sort_keys=True), encoding="utf-8")
        return reply


class ReplayTransport:
    """Serve recorded replies; an unrecorded request raises FixtureMissing."""

    def __init__(self, cassette_dir):
        self.cassette_dir = Path(cassette_dir)

    def send(self, path: str, body: dict) -> dict:
        key = request_key(path, body)
        target = self.cassette_dir / f"{key}.json"
        if not target.exists():
            raise FixtureMissing(f"no recorded response for {path} request {key[:12]} in {self.cassette_dir}")
        return json.loads(target.read_text(encoding="utf-8"))["response"]


class ScriptedTransport:
    """Answer requests from a callable; used to build fixtures and in tests."""

    def __init__(self, responder):
        self.responder = responder
        self.calls: list[tuple[str, dict]] = []

    def send(self, path: str, body: dict) -> dict:
        self.calls.append((path, body))
        return self.responder(path, body)


def chat_reply(content: str) -> dict:
    """Wrap ``content`` as a minimal chat-completions response."""
    return {"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}
