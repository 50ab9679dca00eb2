"""Transport implementations: live HTTP, record, replay, and scripted.

The live transport speaks an OpenAI-compatible chat-completions endpoint.
Record wraps any inner transport and persists one fixture per call;
replay serves a recorded sequence back without any network; scripted
serves programmed responses for tests.
"""

from __future__ import annotations

import base64
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import httpx

from .core import (
    ChatRequest,
    FixtureMismatch,
    GatewayTimeout,
    ImagePart,
    ModelTier,
    TextPart,
    TransportError,
    TransportResult,
)

ENV_ENDPOINT = "LLM_ENDPOINT"
ENV_API_KEY = "LLM_API_KEY"
ENV_MODEL_FRONTIER = "LLM_MODEL_FRONTIER"
ENV_MODEL_FAST = "LLM_MODEL_FAST"


@dataclass
class LiveConfig:
    endpoint: str
    api_key: str
    model_frontier: str
    model_fast: str
    temperature: float | None = None  # provider default when None
    timeout_s: float = 120.0

    @classmethod
    def from_env(cls, env: dict[str, str] | None = None) -> LiveConfig:
        env = dict(os.environ if env is None else env)
        missing = [k for k in (ENV_ENDPOINT, ENV_API_KEY, ENV_MODEL_FRONTIER, ENV_MODEL_FAST) if not env.get(k)]
        if missing:
            raise TransportError(f"missing configuration: {', '.join(missing)}")
        return cls(
            endpoint=env[ENV_ENDPOINT],
            api_key=env[ENV_API_KEY],
            model_frontier=env[ENV_MODEL_FRONTIER],
            model_fast=env[ENV_MODEL_FAST],
        )


class LiveTransport:
    """OpenAI-compatible chat-completions client."""

    def __init__(self, config: LiveConfig, client: httpx.Client | None = None) -> None:
        self.config = config
        self._client = client or httpx.Client(timeout=config.timeout_s)

    def _model_for(self, tier: ModelTier) -> str:
        return self.config.model_frontier if tier is ModelTier.FRONTIER else self.config.model_fast

    def send(self, req: ChatRequest) -> TransportResult:
        content: list[dict] = []
        for part in req.user_parts:
            if isinstance(part, TextPart):
                content.append({"type": "text", "text": part.text})
            elif isinstance(part, ImagePart):
                b64 = base64.b64encode(part.png).decode("ascii")
                content.append(
                    {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{b64}"}}
                )
        body: dict = {
            "model": self._model_for(req.tier),
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": content},
            ],
        }
        if self.config.temperature is not None:
            body["temperature"] = self.config.temperature
        url = self.config.endpoint.rstrip("/") + "/chat/completions"
        try:
            response = self._client.post(
                url,
                json=body,
                headers={"Authorization": f"Bearer {self.config.api_key}"},
            )
            response.raise_for_status()
        except httpx.TimeoutException as exc:
            raise GatewayTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        try:
            return TransportResult(text=response.json()["choices"][0]["message"]["content"])
        except (KeyError, IndexError, TypeError, json.JSONDecodeError) as exc:
            raise TransportError(f"malformed completion payload: {exc}") from exc


@dataclass
class Fixture:
    kind: str
    index: int
    request_digest: str
    response: str
    timestamp_ms: int = 0
    latency_ms: int = 0

    def to_wire(self) -> dict:
        return {
            "kind": self.kind,
            "index": self.index,
            "requestDigest": self.request_digest,
            "response": self.response,
            "timestampMs": self.timestamp_ms,
            "latencyMs": self.latency_ms,
        }

    @classmethod
    def from_wire(cls, doc: dict) -> Fixture:
        return cls(
            kind=doc["kind"],
            index=doc["index"],
            request_digest=doc["requestDigest"],
            response=doc["response"],
            timestamp_ms=doc.get("timestampMs", 0),
            latency_ms=doc.get("latencyMs", 0),
        )


class RecordingTransport:
    """Wraps another transport and captures every exchange as a fixture."""

    def __init__(self, inner, fixture_dir: str | Path | None = None) -> None:
        self.inner = inner
        self.fixtures: list[Fixture] = []
        self.fixture_dir = Path(fixture_dir) if fixture_dir is not None else None
        if self.fixture_dir is not None:
            self.fixture_dir.mkdir(parents=True, exist_ok=True)

    def send(self, req: ChatRequest) -> TransportResult:
        started = time.time()
        result = self.inner.send(req)
        timestamp_ms = result.timestamp_ms if result.timestamp_ms is not None else int(started * 1000)
        latency_ms = (
            result.latency_ms if result.latency_ms is not None else int((time.time() - started) * 1000)
        )
        fixture = Fixture(
            kind=req.kind.value,
            index=len(self.fixtures),
            request_digest=result.request_digest or req.digest(),
            response=result.text,
            timestamp_ms=timestamp_ms,
            latency_ms=latency_ms,
        )
        self.fixtures.append(fixture)
        if self.fixture_dir is not None:
            path = self.fixture_dir / f"{fixture.index:04d}.json"
            path.write_text(json.dumps(fixture.to_wire(), indent=2) + "\n", encoding="utf-8")
        return TransportResult(text=result.text, timestamp_ms=timestamp_ms, latency_ms=latency_ms)


class ReplayTransport:
    """Serves a recorded call sequence; any divergence is a hard error."""

    def __init__(self, fixtures: list[Fixture], *, verify_digest: bool = False) -> None:
        self.fixtures = list(fixtures)
        self.verify_digest = verify_digest
        self._cursor = 0

    @classmethod
    def from_dir(cls, fixture_dir: str | Path, **kwargs) -> ReplayTransport:
        path = Path(fixture_dir)
        fixtures = [
            Fixture.from_wire(json.loads(p.read_text(encoding="utf-8")))
            for p in sorted(path.glob("*.json"))
        ]
        return cls(fixtures, **kwargs)

    def send(self, req: ChatRequest) -> TransportResult:
        if self._cursor >= len(self.fixtures):
            raise TransportError(f"no fixture for call {self._cursor} ({req.kind.value})")
        fixture = self.fixtures[self._cursor]
        if fixture.kind != req.kind.value:
            raise FixtureMismatch(
                f"call {self._cursor}: recorded kind {fixture.kind!r}, requested {req.kind.value!r}"
            )
        if self.verify_digest and fixture.request_digest != req.digest():
            raise FixtureMismatch(f"call {self._cursor}: request digest differs from recording")
        self._cursor += 1
        return TransportResult(
            text=fixture.response,
            timestamp_ms=fixture.timestamp_ms,
            latency_ms=fixture.latency_ms,
            request_digest=fixture.request_digest,
        )


@dataclass
class ScriptedTransport:
    """Programmed responses for tests.

    Each entry is a response string, an exception to raise, or a
    ``(kind, response)`` pair that additionally asserts the call kind.
    Runs dry with TransportError when the script is exhausted.
    """

    script: list = field(default_factory=list)
    sent: list[ChatRequest] = field(default_factory=list)

    def send(self, req: ChatRequest) -> TransportResult:
        self.sent.append(req)
        if not self.script:
            raise TransportError(f"scripted transport exhausted on {req.kind.value}")
        entry = self.script.pop(0)
        if isinstance(entry, Exception):
            raise entry
        if callable(entry):
            entry = entry(req)
        if isinstance(entry, tuple):
            expected_kind, text = entry
            if req.kind.value != expected_kind:
                raise FixtureMismatch(f"scripted kind {expected_kind!r}, requested {req.kind.value!r}")
            return TransportResult(text=text)
        return TransportResult(text=entry)


TransportFactory = Callable[[], object]
