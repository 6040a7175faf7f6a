"""Model backend wire contract: chat-completion POST, stub, and cache.

Tests and offline runs use StubBackend (canned responses keyed by prompt
hash); live runs wrap HttpChatBackend in CachingBackend so that experiments
replay deterministically at temperature 0.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
import urllib.error
import urllib.request
from pathlib import Path

from .errors import BackendTransportError, BackendUnavailableError


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def cache_key(prompt: str, model_name: str) -> str:
    return hashlib.sha256(f"{model_name}\x00{prompt}".encode("utf-8")).hexdigest()


class ModelBackend:
    """Minimal interface: a name and a blocking complete() call."""

    name = "backend"

    def complete(self, prompt: str) -> str:
        raise NotImplementedError


class HttpChatBackend(ModelBackend):
    """POST {model, temperature: 0, messages: [{role, content}]} to a URL.

    The assistant text is read from the response at a dotted JSON path; the
    auth token comes from an environment variable.
    """

    def __init__(self, url: str, model: str,
                 token_env: str = "APIDRIFT_API_TOKEN",
                 response_path: str = "choices.0.message.content",
                 timeout: float = 60.0):
        self.url = url
        self.name = model
        self.token_env = token_env
        self.response_path = response_path
        self.timeout = timeout

    def complete(self, prompt: str) -> str:
        payload = json.dumps({
            "model": self.name,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        }).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        request = urllib.request.Request(self.url, data=payload, headers=headers)
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                document = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
            raise BackendTransportError(f"request to {self.url} failed: {exc}") from exc
        return _json_path(document, self.response_path)


def _json_path(document, path: str):
    node = document
    for part in path.split("."):
        try:
            node = node[int(part)] if part.isdigit() else node[part]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendTransportError(
                f"response lacks configured path {path!r}") from exc
    if not isinstance(node, str):
        raise BackendTransportError(f"value at {path!r} is not text")
    return node


class StubBackend(ModelBackend):
    """Reads canned responses from a directory keyed by prompt hash."""

    def __init__(self, directory, name: str = "stub"):
        self.directory = Path(directory)
        self.name = name

    def complete(self, prompt: str) -> str:
        path = self.directory / f"{prompt_hash(prompt)}.txt"
        if not path.exists():
            raise BackendTransportError(
                f"no canned response {path.name} under {self.directory}")
        return path.read_text(encoding="utf-8")

    def record(self, prompt: str, response: str) -> Path:
        """Write a canned response for this prompt (test seeding helper)."""
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / f"{prompt_hash(prompt)}.txt"
        path.write_text(response, encoding="utf-8")
        return path


class CachingBackend(ModelBackend):
    """Content-addressed response cache around any backend.

    Safe for concurrent readers; insertion goes through an atomic rename.
    """

    def __init__(self, inner: ModelBackend, cache_dir):
        self.inner = inner
        self.name = inner.name
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, prompt: str) -> Path:
        return self.cache_dir / f"{cache_key(prompt, self.name)}.json"

    def complete(self, prompt: str) -> str:
        path = self._path(prompt)
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))["response"]
        response = self.inner.complete(prompt)
        fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump({"model": self.name, "response": response}, fh)
            os.replace(tmp, path)
        except OSError:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return response


class RateLimiter:
    """Minimum interval between request starts, shared across workers."""

    def __init__(self, min_interval: float):
        self.min_interval = min_interval
        self._lock = threading.Lock()
        self._next_at = 0.0

    def wait(self) -> None:
        if self.min_interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next_at - now
            self._next_at = max(now, self._next_at) + self.min_interval
        if delay > 0:
            time.sleep(delay)


def request_with_retries(backend: ModelBackend, prompt: str,
                         attempts: int = 3, base_delay: float = 0.2,
                         limiter: RateLimiter | None = None) -> str:
    """Bounded exponential backoff over transport errors."""
    last: Exception | None = None
    for attempt in range(attempts):
        if limiter is not None:
            limiter.wait()
        try:
            return backend.complete(prompt)
        except BackendTransportError as exc:
            last = exc
            if attempt + 1 < attempts:
                time.sleep(base_delay * (2 ** attempt))
    raise BackendUnavailableError(
        f"backend {backend.name} unavailable after {attempts} attempts: {last}")
