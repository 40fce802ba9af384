"""Uniform chat-completion interface with interchangeable implementations.

One wire protocol (OpenAI-style chat completions) covers remote models,
a deterministic mock, a record/replay cache, and the oracle-scripted
stand-in defined in :mod:`langrl.oracle_backend`. Requests are keyed by a
digest of (turns, sampling params) so temperature sweeps never share
cache entries.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import requests


class BackendError(RuntimeError):
    pass


class Timeout(BackendError):
    pass


class RateLimited(BackendError):
    pass


class CacheMiss(BackendError):
    pass


class MalformedResponse(BackendError):
    pass


@dataclass(frozen=True)
class ChatTurn:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"bad role {self.role!r}")
        if not self.content:
            raise ValueError("turn content must be non-empty")


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 1.0
    top_k: int = 50
    top_p: float = 0.95
    max_tokens: int = 512

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not (0 < self.top_p <= 1):
            raise ValueError("top_p must be in (0, 1]")


GREEDY = SamplingParams(temperature=0.0)


@dataclass(frozen=True)
class CompletionResult:
    text: str
    backend_id: str
    cached: bool = False
    latency: float = 0.0


def request_digest(turns: Sequence[ChatTurn], params: SamplingParams) -> str:
    """Stable key of a request; identical inputs digest identically anywhere."""
    payload = {
        "messages": [{"role": t.role, "content": t.content} for t in turns],
        "params": asdict(params),
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class Backend:
    """Base: subclasses implement complete(); complete_many() is shared."""

    backend_id = "base"
    max_in_flight = 8

    def complete(self, turns: Sequence[ChatTurn], params: SamplingParams) -> CompletionResult:
        raise NotImplementedError

    def complete_many(
        self, batch: Sequence[tuple[Sequence[ChatTurn], SamplingParams]]
    ) -> list[Union[CompletionResult, BackendError]]:
        """Positionally aligned results; failed slots hold their error."""
        if not batch:
            raise ValueError("batch must be non-empty")

        def one(item):
            turns, params = item
            try:
                return self.complete(turns, params)
            except BackendError as err:
                return err

        # The pool size is the concurrency cap: at most max_in_flight
        # requests are ever outstanding.
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(one, batch))


class MockBackend(Backend):
    """Deterministic digest -> reply lookup, loadable from a JSON script file."""

    backend_id = "mock"

    def __init__(self, script_path: Optional[str] = None):
        self.replies: dict[str, str] = {}
        if script_path is not None:
            with open(script_path) as fh:
                self.replies.update(json.load(fh))

    def register(self, turns: Sequence[ChatTurn], params: SamplingParams, text: str) -> None:
        self.replies[request_digest(turns, params)] = text

    def complete(self, turns, params) -> CompletionResult:
        digest = request_digest(turns, params)
        try:
            text = self.replies[digest]
        except KeyError:
            raise CacheMiss(f"mock has no reply for digest {digest[:12]}...")
        return CompletionResult(text=text, backend_id=self.backend_id, cached=True)


class ReplayBackend(Backend):
    """File-per-digest response cache.

    strict replay answers only from the cache; with a ``record_with``
    backend, misses are forwarded and the responses recorded, which is the
    record half of the record-then-replay contract. Writes go through a
    temp file and an atomic rename so concurrent writers are safe.
    """

    backend_id = "replay"

    def __init__(
        self,
        cache_dir: str,
        strict: bool = True,
        record_with: Optional[Backend] = None,
    ):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.strict = strict
        self.record_with = record_with
        if record_with is not None:
            self.max_in_flight = record_with.max_in_flight

    def _path(self, digest: str) -> Path:
        return self.cache_dir / f"{digest}.json"

    def complete(self, turns, params) -> CompletionResult:
        digest = request_digest(turns, params)
        path = self._path(digest)
        if path.exists():
            entry = json.loads(path.read_text())
            return CompletionResult(
                text=entry["response"], backend_id=self.backend_id, cached=True
            )
        if self.record_with is None:
            if self.strict:
                raise CacheMiss(f"no cached response for digest {digest[:12]}...")
            raise CacheMiss("replay cache miss and no recording backend configured")
        result = self.record_with.complete(turns, params)
        entry = {
            "request": {
                "messages": [{"role": t.role, "content": t.content} for t in turns],
                "params": asdict(params),
            },
            "response": result.text,
        }
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(entry, sort_keys=True, indent=1))
        os.replace(tmp, path)
        return result


class HttpBackend(Backend):
    """OpenAI-compatible chat-completions client with retry and backoff."""

    backend_id = "http"

    def __init__(
        self,
        base_url: str,
        model_name: str,
        api_key_env: str = "OPENAI_API_KEY",
        timeout: float = 60.0,
        max_retries: int = 3,
        max_in_flight: int = 8,
        backoff: float = 0.5,
    ):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.base_url = base_url.rstrip("/")
        self.model_name = model_name
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_retries = max_retries
        self.max_in_flight = max_in_flight
        self.backoff = backoff

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def request_body(self, turns, params: SamplingParams) -> dict:
        return {
            "model": self.model_name,
            "messages": [{"role": t.role, "content": t.content} for t in turns],
            "temperature": params.temperature,
            "top_p": params.top_p,
            "top_k": params.top_k,
            "max_tokens": params.max_tokens,
        }

    def complete(self, turns, params) -> CompletionResult:
        url = f"{self.base_url}/chat/completions"
        body = self.request_body(turns, params)
        start = time.monotonic()
        last_err: Optional[BackendError] = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = requests.post(
                    url, json=body, headers=self._headers(), timeout=self.timeout
                )
            except requests.Timeout:
                last_err = Timeout(f"request to {url} timed out")
                continue
            except requests.ConnectionError as err:
                last_err = BackendError(f"connection failed: {err}")
                continue
            if resp.status_code == 429:
                last_err = RateLimited("rate limited by server")
                continue
            if resp.status_code >= 500:
                last_err = BackendError(f"server error {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise MalformedResponse(
                    f"unexpected status {resp.status_code}: {resp.text[:200]}"
                )
            try:
                data = resp.json()
                text = data["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as err:
                raise MalformedResponse(f"unparseable completion body: {err}")
            if not text:
                raise MalformedResponse("empty completion text")
            return CompletionResult(
                text=text,
                backend_id=self.backend_id,
                cached=False,
                latency=time.monotonic() - start,
            )
        assert last_err is not None
        raise last_err


# --- endpoint conformance --------------------------------------------------------------

def check_endpoint_conformance(
    base_url: str, model_name: str = "served-model", max_in_flight: int = 4
) -> list[tuple[str, bool, str]]:
    """Exercise a chat-completions endpoint against this client's contract.

    Returns (check name, passed, detail) rows; all-passed means any engine
    pipeline can use the endpoint as an http backend.
    """
    checks: list[tuple[str, bool, str]] = []
    backend = HttpBackend(base_url, model_name, max_retries=0,
                          max_in_flight=max_in_flight)
    turns = (
        ChatTurn("system", "You are a test probe."),
        ChatTurn("user", "Reply with any text."),
    )
    params = SamplingParams()

    def record(name: str, fn) -> None:
        try:
            detail = fn()
            checks.append((name, True, detail or "ok"))
        except Exception as err:  # noqa: BLE001 - conformance report, not control flow
            checks.append((name, False, f"{type(err).__name__}: {err}"))

    record("basic completion", lambda: backend.complete(turns, params).text[:40])

    def multi_turn():
        longer = turns + (
            ChatTurn("assistant", "placeholder"),
            ChatTurn("user", "And again."),
        )
        return backend.complete(longer, params).text[:40]

    record("multi-turn conversation", multi_turn)

    def sampling():
        return backend.complete(turns, SamplingParams(0.2, 10, 0.5, 64)).text[:40]

    record("sampling parameters accepted", sampling)

    def malformed():
        resp = requests.post(
            f"{base_url.rstrip('/')}/chat/completions",
            data="{not json",
            headers={"Content-Type": "application/json"},
            timeout=10,
        )
        if not (400 <= resp.status_code < 500):
            raise MalformedResponse(
                f"expected 4xx for malformed body, got {resp.status_code}"
            )
        return f"status {resp.status_code}"

    record("malformed request rejected", malformed)

    def concurrent():
        batch = [(turns, params)] * max_in_flight
        results = backend.complete_many(batch)
        bad = [r for r in results if isinstance(r, BackendError)]
        if bad:
            raise bad[0]
        return f"{len(results)} answered"

    record("concurrent requests", concurrent)
    return checks
