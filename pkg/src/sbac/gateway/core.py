"""Model-call vocabulary: call kinds, tier routing, requests, and the call log."""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator


class ModelTier(Enum):
    FRONTIER = "frontier"
    FAST = "fast"


class CallKind(Enum):
    MARK_IDENTIFICATION = "mark_identification"
    CI_ANALYSIS = "ci_analysis"
    INTENT_CLASSIFICATION = "intent_classification"
    DEEP_RESOLUTION = "deep_resolution"
    SKETCH_SYNC = "sketch_sync"
    POLICY_PROPAGATION = "policy_propagation"
    INSIGHT_PROPAGATION = "insight_propagation"
    REIDENTIFICATION = "reidentification"
    FACTOR_DECOMPOSITION = "factor_decomposition"
    STORY_REALIZATION = "story_realization"


# Latency-sensitive coordination calls run on the fast tier; everything
# that has to reason runs on the frontier tier.
TIER_BY_KIND: dict[CallKind, ModelTier] = {
    CallKind.MARK_IDENTIFICATION: ModelTier.FRONTIER,
    CallKind.CI_ANALYSIS: ModelTier.FRONTIER,
    CallKind.INTENT_CLASSIFICATION: ModelTier.FAST,
    CallKind.DEEP_RESOLUTION: ModelTier.FRONTIER,
    CallKind.SKETCH_SYNC: ModelTier.FRONTIER,
    CallKind.POLICY_PROPAGATION: ModelTier.FAST,
    CallKind.INSIGHT_PROPAGATION: ModelTier.FAST,
    CallKind.REIDENTIFICATION: ModelTier.FRONTIER,
    CallKind.FACTOR_DECOMPOSITION: ModelTier.FRONTIER,
    CallKind.STORY_REALIZATION: ModelTier.FRONTIER,
}


class ImagePurpose(Enum):
    UNANNOTATED = "unannotated"
    NUMBERED = "numbered"
    SOM = "som"
    VIEWPORT = "viewport"


# Which image purposes each call kind accepts. Kinds not listed accept none.
_ALLOWED_IMAGES: dict[CallKind, frozenset[ImagePurpose]] = {
    CallKind.MARK_IDENTIFICATION: frozenset({ImagePurpose.UNANNOTATED, ImagePurpose.NUMBERED}),
    CallKind.REIDENTIFICATION: frozenset({ImagePurpose.UNANNOTATED, ImagePurpose.NUMBERED}),
    CallKind.CI_ANALYSIS: frozenset({ImagePurpose.SOM}),
    CallKind.SKETCH_SYNC: frozenset({ImagePurpose.VIEWPORT}),
}


class TransportError(RuntimeError):
    """Transport-level failure (network, auth, missing fixture)."""


class GatewayTimeout(TransportError):
    """The transport did not answer within its deadline."""


class FixtureMismatch(TransportError):
    """A replayed call does not line up with the recorded sequence."""


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    png: bytes
    purpose: ImagePurpose


@dataclass(frozen=True)
class ChatRequest:
    """One model call: rendered system prompt plus ordered user parts."""

    kind: CallKind
    system_prompt: str
    user_parts: tuple[TextPart | ImagePart, ...]
    schema_id: str

    def __post_init__(self) -> None:
        allowed = _ALLOWED_IMAGES.get(self.kind, frozenset())
        for part in self.user_parts:
            if isinstance(part, ImagePart) and part.purpose not in allowed:
                raise ValueError(
                    f"{self.kind.value} does not accept {part.purpose.value} images"
                )

    @property
    def tier(self) -> ModelTier:
        return TIER_BY_KIND[self.kind]

    def digest(self) -> str:
        """Stable content digest used for fixture keying and audit."""
        parts: list[Any] = []
        for part in self.user_parts:
            if isinstance(part, TextPart):
                parts.append({"text": part.text})
            else:
                parts.append(
                    {
                        "image": hashlib.sha256(part.png).hexdigest(),
                        "purpose": part.purpose.value,
                    }
                )
        canonical = json.dumps(
            {
                "kind": self.kind.value,
                "systemPrompt": self.system_prompt,
                "userParts": parts,
                "schemaId": self.schema_id,
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CallRecord:
    kind: CallKind
    tier: ModelTier
    request_digest: str
    response: str
    timestamp_ms: int
    latency_ms: int

    def to_wire(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "tier": self.tier.value,
            "requestDigest": self.request_digest,
            "response": self.response,
            "timestampMs": self.timestamp_ms,
            "latencyMs": self.latency_ms,
        }

    @classmethod
    def from_wire(cls, doc: dict[str, Any]) -> CallRecord:
        return cls(
            kind=CallKind(doc["kind"]),
            tier=ModelTier(doc["tier"]),
            request_digest=doc["requestDigest"],
            response=doc["response"],
            timestamp_ms=doc["timestampMs"],
            latency_ms=doc["latencyMs"],
        )


class CallLog:
    """Append-only per-session record of transport invocations."""

    def __init__(self, records: list[CallRecord] | None = None) -> None:
        self._records: list[CallRecord] = list(records or [])
        self._lock = threading.Lock()

    def append(self, record: CallRecord) -> None:
        with self._lock:
            self._records.append(record)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[CallRecord]:
        return iter(list(self._records))

    def records(self) -> list[CallRecord]:
        return list(self._records)

    def by_kind(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for record in self._records:
            counts[record.kind.value] = counts.get(record.kind.value, 0) + 1
        return counts


@dataclass
class TransportResult:
    """Raw transport output plus optional recorded metadata (replay mode).

    When a transport supplies timestamp/latency/digest values they override
    the freshly computed ones, so a replayed session reproduces its call
    log byte-for-byte.
    """

    text: str
    timestamp_ms: int | None = None
    latency_ms: int | None = None
    request_digest: str | None = None


def invoke(req: ChatRequest, transport: Any, log: CallLog | None = None, *, retries: int = 1) -> tuple[str, CallRecord]:
    """Send a request through a transport, retrying transport failures.

    Retries apply only to transport-level errors (never to schema problems,
    which are the caller's fallback concern). Appends exactly one CallRecord
    per successful invocation.
    """
    attempts = retries + 1
    last_error: TransportError | None = None
    for _ in range(attempts):
        started = time.time()
        try:
            result = transport.send(req)
        except FixtureMismatch:
            raise
        except TransportError as exc:
            last_error = exc
            continue
        timestamp_ms = result.timestamp_ms if result.timestamp_ms is not None else int(started * 1000)
        latency_ms = (
            result.latency_ms
            if result.latency_ms is not None
            else int((time.time() - started) * 1000)
        )
        record = CallRecord(
            kind=req.kind,
            tier=req.tier,
            request_digest=result.request_digest or req.digest(),
            response=result.text,
            timestamp_ms=timestamp_ms,
            latency_ms=latency_ms,
        )
        if log is not None:
            log.append(record)
        return result.text, record
    assert last_error is not None
    raise last_error
