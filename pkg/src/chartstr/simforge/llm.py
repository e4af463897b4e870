"""Chat-completion client contract plus an HTTP implementation and a mock."""

from __future__ import annotations

import re
import threading
from abc import ABC, abstractmethod
from collections import defaultdict
from typing import Callable, Optional, Sequence, Union

import requests

__all__ = [
    "LlmClient",
    "LlmTransport",
    "HttpChatClient",
    "MockLlmClient",
    "strip_code_fences",
]


class LlmTransport(RuntimeError):
    def __init__(self, status: Optional[int], message: str = ""):
        self.status = status
        super().__init__(f"LLM transport failure (status={status}) {message}".strip())


class LlmClient(ABC):
    """Anything that can answer a system + user message pair.

    Implementations must be safe to call from several threads at once.
    """

    model_id: str = "unknown"

    @abstractmethod
    def complete(self, system: str, user: str, *, stage: str = "") -> str:
        """Return the assistant text.  ``stage`` is a routing hint only."""


class HttpChatClient(LlmClient):
    """POSTs an OpenAI-style ``/chat/completions`` request.

    Body: ``{"model", "messages": [system, user], "temperature"}``; the reply
    text is read from ``choices[0].message.content``.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: Optional[str] = None,
        temperature: Optional[float] = None,
        timeout: float = 120.0,
    ):
        self.endpoint = endpoint
        self.model_id = model
        self.temperature = temperature
        self.timeout = timeout
        self._headers = {"Content-Type": "application/json"}
        if api_key:
            self._headers["Authorization"] = f"Bearer {api_key}"
        self._local = threading.local()

    def _session(self) -> requests.Session:
        s = getattr(self._local, "session", None)
        if s is None:
            s = self._local.session = requests.Session()
        return s

    def complete(self, system: str, user: str, *, stage: str = "") -> str:
        body: dict = {
            "model": self.model_id,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        }
        if self.temperature is not None:
            body["temperature"] = self.temperature
        try:
            resp = self._session().post(
                self.endpoint, json=body, headers=self._headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise LlmTransport(None, str(exc)) from exc
        if resp.status_code != 200:
            raise LlmTransport(resp.status_code, resp.text[:200])
        try:
            return resp.json()["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise LlmTransport(resp.status_code, f"malformed response: {exc}") from exc


Responder = Union[str, Sequence[str], Callable[[str, int], str]]


class MockLlmClient(LlmClient):
    """Scripted client for tests and offline runs.

    ``label`` and ``script`` answer the data and image stages.  Each may be a
    fixed string, a list consumed per distinct user prompt (the n-th call with
    the same prompt gets item n, the last item repeats), or a callable
    ``(user_text, n) -> str``.  Keying on the prompt keeps replies
    deterministic when jobs run concurrently.
    """

    def __init__(self, label: Responder, script: Responder, model_id: str = "mock"):
        self.model_id = model_id
        self._responders = {"data": label, "image": script}
        self._lock = threading.Lock()
        self._seen: dict[tuple[str, str], int] = defaultdict(int)
        self.calls: list[tuple[str, str]] = []

    @property
    def call_count(self) -> int:
        with self._lock:
            return len(self.calls)

    def complete(self, system: str, user: str, *, stage: str = "") -> str:
        if stage not in self._responders:
            raise ValueError(f"mock client got unknown stage {stage!r}")
        with self._lock:
            n = self._seen[(stage, user)]
            self._seen[(stage, user)] += 1
            self.calls.append((stage, user))
        r = self._responders[stage]
        if callable(r):
            return r(user, n)
        if isinstance(r, str):
            return r
        return r[min(n, len(r) - 1)]


_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)(?:\n[ \t]*)?```", re.DOTALL)


def strip_code_fences(text: str) -> str:
    """Return the body of the first fenced block, or the text trimmed."""
    m = _FENCE_RE.search(text)
    if m:
        return m.group(1).strip("\n")
    return text.strip()


class CountingClient(LlmClient):
    """Wraps another client and counts calls."""

    def __init__(self, inner: LlmClient):
        self.inner = inner
        self.model_id = inner.model_id
        self._lock = threading.Lock()
        self.count = 0

    def complete(self, system: str, user: str, *, stage: str = "") -> str:
        with self._lock:
            self.count += 1
        return self.inner.complete(system, user, stage=stage)


_DATA_SLOT_RE = re.compile(r"<data>\s?(.*?)\s?</data>", re.DOTALL)

# writes a 1x1 PNG with the standard library only
OFFLINE_SCRIPT = """\
import struct
import zlib


def chunk(kind, data):
    body = kind + data
    return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)


header = struct.pack(">IIBBBBB", 1, 1, 8, 2, 0, 0, 0)
pixels = zlib.compress(b"\\x00\\xff\\xff\\xff")
with open("chart.png", "wb") as fh:
    fh.write(b"\\x89PNG\\r\\n\\x1a\\n" + chunk(b"IHDR", header) + chunk(b"IDAT", pixels) + chunk(b"IEND", b""))
"""


def offline_mock_client() -> MockLlmClient:
    """Mock that echoes the seed as the new label and draws a 1-pixel PNG.

    Useful for dry runs of the pipeline plumbing without an LLM endpoint.
    """

    def echo(user: str, n: int) -> str:
        m = _DATA_SLOT_RE.search(user)
        return m.group(1) if m else user

    return MockLlmClient(label=echo, script=OFFLINE_SCRIPT, model_id="offline-mock")
