"""Pluggable completion backends.

Two interchangeable backends implement the same ``complete`` contract:
an HTTP adapter speaking plain JSON to a completion endpoint and a
deterministic scripted mock for tests.  Swapping one for the other must
not change downstream behavior for identical completion texts, so stop
truncation and the n-limit live in shared code, not in the adapters.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

log = logging.getLogger(__name__)

DEFAULT_MAX_TOKENS = 512
TESTGEN_N = 5
TRANSLATION_N = 50
DEFAULT_TEMPERATURE = 0.8


class BackendUnavailable(RuntimeError):
    """The backend could not serve the request within the retry budget."""


class MalformedResponse(RuntimeError):
    """The backend replied with something outside the wire schema."""


@dataclass(frozen=True, slots=True)
class GenerationParams:
    n: int
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    stop: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.temperature < 0:
            raise ValueError("temperature must be nonnegative")


def testgen_params(stop: tuple[str, ...] = ()) -> GenerationParams:
    return GenerationParams(n=TESTGEN_N, temperature=DEFAULT_TEMPERATURE, stop=stop)


def translation_params(n: int = TRANSLATION_N,
                       stop: tuple[str, ...] = ()) -> GenerationParams:
    return GenerationParams(n=n, temperature=DEFAULT_TEMPERATURE, stop=stop)


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def truncate_at_stop(text: str, stop: tuple[str, ...]) -> str:
    cut = len(text)
    for tok in stop:
        idx = text.find(tok)
        if idx != -1:
            cut = min(cut, idx)
    return text[:cut]


class Backend(Protocol):
    def raw_complete(self, prompt: str, params: GenerationParams) -> list[str]:
        ...


class MockBackend:
    """Scripted completions keyed by exact prompt hash.

    An optional fallback generator serves prompts the script does not
    cover; without one, an unknown prompt yields no completions.
    """

    def __init__(
        self,
        scripted: dict[str, list[str]] | None = None,
        fallback: Callable[[str, GenerationParams], list[str]] | None = None,
    ) -> None:
        self._scripted: dict[str, list[str]] = {}
        self._fallback = fallback
        for key, texts in (scripted or {}).items():
            self._scripted[key] = list(texts)

    def script(self, prompt: str, completions: list[str]) -> None:
        self._scripted[prompt_key(prompt)] = list(completions)

    @classmethod
    def from_replay_log(cls, path: str) -> "MockBackend":
        backend = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                backend._scripted[record["prompt_sha256"]] = list(
                    record["completions"]
                )
        return backend

    def raw_complete(self, prompt: str, params: GenerationParams) -> list[str]:
        key = prompt_key(prompt)
        if key in self._scripted:
            return list(self._scripted[key])
        if self._fallback is not None:
            return list(self._fallback(prompt, params))
        return []


class HTTPBackend:
    """JSON-over-HTTP adapter for a completion endpoint.

    Request body: {"prompt", "n", "temperature", "max_tokens", "stop"}.
    Response body: {"choices": [{"text": ...}, ...]}.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        token: str | None = None,
        timeout: float = 120.0,
    ) -> None:
        self.endpoint = endpoint or os.environ.get("LLM_ENDPOINT", "")
        self.token = token if token is not None else os.environ.get("LLM_TOKEN", "")
        self.timeout = timeout
        if not self.endpoint:
            raise ValueError("no completion endpoint configured")

    def raw_complete(self, prompt: str, params: GenerationParams) -> list[str]:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        body = {
            "prompt": prompt,
            "n": params.n,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "stop": list(params.stop),
        }
        try:
            resp = requests.post(
                self.endpoint, json=body, headers=headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise BackendUnavailable(str(exc)) from exc
        if resp.status_code >= 500:
            raise BackendUnavailable(f"server error {resp.status_code}")
        if resp.status_code != 200:
            raise MalformedResponse(f"unexpected status {resp.status_code}")
        try:
            payload = resp.json()
            choices = payload["choices"]
            return [c["text"] for c in choices]
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedResponse(f"bad response shape: {exc}") from exc


@dataclass(slots=True)
class _ReplayLog:
    path: str
    lock: threading.Lock = field(default_factory=threading.Lock)

    def append(self, prompt: str, params: GenerationParams,
               completions: list[str]) -> None:
        record = {
            "prompt_sha256": prompt_key(prompt),
            "n": params.n,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "stop": list(params.stop),
            "completions": completions,
            "content_sha256": hashlib.sha256(
                json.dumps(completions, sort_keys=True).encode("utf-8")
            ).hexdigest(),
        }
        line = json.dumps(record, sort_keys=True)
        with self.lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")


class LLMClient:
    """Retry, truncation, concurrency cap, and replay logging around a
    backend.  Thread safe."""

    def __init__(
        self,
        backend: Backend,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        max_in_flight: int = 8,
        replay_log_path: str | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")
        self.backend = backend
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self._gate = threading.Semaphore(max_in_flight)
        self._log = _ReplayLog(replay_log_path) if replay_log_path else None
        self._sleep = sleep

    def complete(self, prompt: str, params: GenerationParams) -> list[str]:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        attempt = 0
        with self._gate:
            while True:
                try:
                    raw = self.backend.raw_complete(prompt, params)
                    break
                except BackendUnavailable:
                    if attempt >= self.max_retries:
                        raise
                    delay = self.backoff_base * (2 ** attempt)
                    log.warning("backend unavailable, retry %d in %.2fs",
                                attempt + 1, delay)
                    self._sleep(delay)
                    attempt += 1
        texts = [truncate_at_stop(t, params.stop) for t in raw[: params.n]]
        if self._log is not None:
            self._log.append(prompt, params, texts)
        return texts
