"""Strict parsing of structured model responses.

Responses must be JSON (an optional markdown code fence is tolerated and
stripped). Every schema is all-or-nothing: any violation raises
SchemaError with the offending path, and the caller decides whether to
re-ask or fall back. Enum-valued fields are closed sets; unknown members
are violations, never coerced.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from ..policy_model import (
    InsightCard,
    IssueType,
    Policy,
    WireFormatError,
    insight_from_wire,
    policy_from_wire,
)

_FENCE_RE = re.compile(r"^\s*```(?:json)?\s*\n(.*?)\n\s*```\s*$", re.S)


class SchemaError(ValueError):
    """Model output violates its response schema; carries the violation path."""

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class NextAction(Enum):
    CONTINUE = "continue"
    TEST = "test"


class RawIntent(Enum):
    UNDERSTAND = "understand"
    CORRECT = "correct"
    FIX = "fix"
    EXPLORE = "explore"


@dataclass
class AnalyzeParse:
    chat: str
    generate: str | None
    policies: list[Policy]
    insights: list[InsightCard]
    next_action: NextAction


@dataclass
class ClassifyParse:
    intent: RawIntent
    response: str
    dismiss_insight: bool


@dataclass
class DeepResolutionParse:
    chat: str
    policies: list[Policy]
    insights: list[InsightCard]
    generate: str | None
    proposed_actions: list[str]


@dataclass
class PolicyRippleParse:
    has_ripple: bool
    summary: str
    policies: list[Policy]


@dataclass
class InsightRippleParse:
    has_changes: bool
    summary: str
    insights: list[InsightCard]


@dataclass
class SketchSyncParse:
    strategy: str
    events: list[dict[str, Any]] = field(default_factory=list)


@dataclass
class RealizeParse:
    vignettes: list[InsightCard]


def strip_code_fence(raw: str) -> str:
    m = _FENCE_RE.match(raw)
    return m.group(1) if m else raw


def _load_object(raw: str) -> dict[str, Any]:
    try:
        doc = json.loads(strip_code_fence(raw))
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise SchemaError("$", "expected a JSON object")
    return doc


def _reject_unknown(doc: dict[str, Any], allowed: set[str], path: str) -> None:
    for key in doc:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}", "unknown field")


def _get_str(doc: dict[str, Any], key: str, path: str) -> str:
    if key not in doc:
        raise SchemaError(f"{path}.{key}", "missing required field")
    if not isinstance(doc[key], str):
        raise SchemaError(f"{path}.{key}", "expected a string")
    return doc[key]


def _get_bool(doc: dict[str, Any], key: str, path: str, default: bool | None = None) -> bool:
    if key not in doc:
        if default is not None:
            return default
        raise SchemaError(f"{path}.{key}", "missing required field")
    if not isinstance(doc[key], bool):
        raise SchemaError(f"{path}.{key}", "expected a boolean")
    return doc[key]


def _get_list(doc: dict[str, Any], key: str, path: str) -> list[Any]:
    if key not in doc:
        raise SchemaError(f"{path}.{key}", "missing required field")
    if not isinstance(doc[key], list):
        raise SchemaError(f"{path}.{key}", "expected a list")
    return doc[key]


def _get_optional_str(doc: dict[str, Any], key: str, path: str) -> str | None:
    value = doc.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        raise SchemaError(f"{path}.{key}", "expected a string or null")
    return value


def _parse_policies(items: list[Any], path: str) -> list[Policy]:
    policies = []
    for i, item in enumerate(items):
        try:
            policies.append(policy_from_wire(item, strict=True, path=f"{path}[{i}]"))
        except WireFormatError as exc:
            raise SchemaError(exc.path, exc.message) from None
    return policies


def _parse_insights(items: list[Any], path: str) -> list[InsightCard]:
    cards = []
    for i, item in enumerate(items):
        try:
            cards.append(insight_from_wire(item, strict=True, path=f"{path}[{i}]"))
        except WireFormatError as exc:
            raise SchemaError(exc.path, exc.message) from None
    return cards


def _parse_analyze(doc: dict[str, Any]) -> AnalyzeParse:
    _reject_unknown(doc, {"chat", "generate", "policies", "insights", "nextAction"}, "$")
    raw_next = _get_str(doc, "nextAction", "$")
    try:
        next_action = NextAction(raw_next)
    except ValueError:
        raise SchemaError("$.nextAction", f"unknown value {raw_next!r}") from None
    return AnalyzeParse(
        chat=_get_str(doc, "chat", "$"),
        generate=_get_optional_str(doc, "generate", "$"),
        policies=_parse_policies(_get_list(doc, "policies", "$"), "$.policies"),
        insights=_parse_insights(_get_list(doc, "insights", "$"), "$.insights"),
        next_action=next_action,
    )


def _parse_classify(doc: dict[str, Any]) -> ClassifyParse:
    _reject_unknown(doc, {"intent", "response", "dismissInsight"}, "$")
    raw_intent = _get_str(doc, "intent", "$")
    try:
        intent = RawIntent(raw_intent)
    except ValueError:
        raise SchemaError("$.intent", f"unknown value {raw_intent!r}") from None
    return ClassifyParse(
        intent=intent,
        response=_get_str(doc, "response", "$"),
        dismiss_insight=_get_bool(doc, "dismissInsight", "$", default=False),
    )


def _parse_deep_resolution(doc: dict[str, Any]) -> DeepResolutionParse:
    _reject_unknown(doc, {"chat", "policies", "insights", "generate", "proposedActions"}, "$")
    generate = _get_optional_str(doc, "generate", "$")
    proposed = doc.get("proposedActions", [])
    if not isinstance(proposed, list) or not all(isinstance(a, str) for a in proposed):
        raise SchemaError("$.proposedActions", "expected a list of strings")
    if generate is None and proposed:
        raise SchemaError("$.proposedActions", "must be empty when generate is null")
    if generate is not None and not proposed:
        raise SchemaError("$.proposedActions", "must be non-empty when generate is set")
    return DeepResolutionParse(
        chat=_get_str(doc, "chat", "$"),
        policies=_parse_policies(_get_list(doc, "policies", "$"), "$.policies"),
        insights=_parse_insights(_get_list(doc, "insights", "$"), "$.insights"),
        generate=generate,
        proposed_actions=list(proposed),
    )


def _parse_policy_ripple(doc: dict[str, Any]) -> PolicyRippleParse:
    _reject_unknown(doc, {"hasRipple", "summary", "policies"}, "$")
    return PolicyRippleParse(
        has_ripple=_get_bool(doc, "hasRipple", "$"),
        summary=_get_str(doc, "summary", "$"),
        policies=_parse_policies(_get_list(doc, "policies", "$"), "$.policies"),
    )


def _parse_insight_ripple(doc: dict[str, Any]) -> InsightRippleParse:
    _reject_unknown(doc, {"hasChanges", "summary", "insights"}, "$")
    return InsightRippleParse(
        has_changes=_get_bool(doc, "hasChanges", "$"),
        summary=_get_str(doc, "summary", "$"),
        insights=_parse_insights(_get_list(doc, "insights", "$"), "$.insights"),
    )


_EVENT_TYPES = {"think", "create", "edit", "move", "delete"}
_SHAPE_KEYS = {
    "type", "shapeId", "note", "x", "y", "x1", "y1", "x2", "y2",
    "width", "height", "color", "fill", "text", "textAlign", "fromId", "toId",
}
_EVENT_KEYS = {
    "type", "shapeId", "intent", "shape", "text", "color", "fill",
    "width", "height", "x", "y", "thought",
}


def _parse_sketch_sync(doc: dict[str, Any]) -> SketchSyncParse:
    _reject_unknown(doc, {"long_description_of_strategy", "events"}, "$")
    strategy = _get_str(doc, "long_description_of_strategy", "$")
    events = _get_list(doc, "events", "$")
    for i, event in enumerate(events):
        path = f"$.events[{i}]"
        if not isinstance(event, dict):
            raise SchemaError(path, "expected an object")
        etype = event.get("type")
        if etype not in _EVENT_TYPES:
            raise SchemaError(f"{path}.type", f"unknown event type {etype!r}")
        _reject_unknown(event, _EVENT_KEYS, path)
        if etype == "create":
            shape = event.get("shape")
            if not isinstance(shape, dict):
                raise SchemaError(f"{path}.shape", "create event requires a shape object")
            _reject_unknown(shape, _SHAPE_KEYS, f"{path}.shape")
        elif etype in {"edit", "move", "delete"}:
            if not isinstance(event.get("shapeId"), str):
                raise SchemaError(f"{path}.shapeId", f"{etype} event requires a shapeId")
    return SketchSyncParse(strategy=strategy, events=list(events))


def _parse_identify(doc: dict[str, Any]) -> Any:
    from ..mark_model import identification_from_wire

    try:
        return identification_from_wire(doc, path="$")
    except WireFormatError as exc:
        raise SchemaError(exc.path, exc.message) from None


def _parse_decompose(doc: dict[str, Any]) -> Any:
    from ..vignette import schemas_from_wire

    _reject_unknown(doc, {"schemas"}, "$")
    return schemas_from_wire(_get_list(doc, "schemas", "$"))


def _parse_realize(doc: dict[str, Any]) -> RealizeParse:
    _reject_unknown(doc, {"vignettes"}, "$")
    vignettes = _parse_insights(_get_list(doc, "vignettes", "$"), "$.vignettes")
    for i, card in enumerate(vignettes):
        if card.type is not IssueType.VIGNETTE:
            raise SchemaError(f"$.vignettes[{i}].type", "expected type 'vignette'")
    return RealizeParse(vignettes=vignettes)


_PARSERS = {
    "identify": _parse_identify,
    "analyze": _parse_analyze,
    "classify": _parse_classify,
    "deep_resolution": _parse_deep_resolution,
    "sketch_sync": _parse_sketch_sync,
    "propagate_policies": _parse_policy_ripple,
    "propagate_insights": _parse_insight_ripple,
    "decompose": _parse_decompose,
    "realize": _parse_realize,
}


def parse_structured(raw: str, schema_id: str) -> Any:
    """Parse and validate a raw model response against a named schema.

    Never returns a partially valid object: the first violation aborts the
    whole parse with SchemaError.
    """
    if schema_id not in _PARSERS:
        raise KeyError(f"unknown schema id {schema_id!r}")
    return _PARSERS[schema_id](_load_object(raw))
