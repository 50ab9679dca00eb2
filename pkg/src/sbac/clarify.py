"""Two-pass clarify workflow: fast intent classification, then routing.

Understand and correct turns finish on the fast tier; fix and explore
(and anything unclassifiable, conservatively treated as fix) escalate to
a frontier deep-resolution call. A fix may additionally propose a sketch
synchronization batch, which stays pending until the user applies it.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any

from .policy_model import (
    InsightCard,
    Policy,
    render_rationale,
    validate_insight,
    validate_policy,
)
from .gateway import (
    CallKind,
    ChatRequest,
    ClassifyParse,
    DeepResolutionParse,
    SchemaError,
    TextPart,
    invoke,
    parse_structured,
    render_prompt,
)

logger = logging.getLogger(__name__)


class Intent(Enum):
    UNDERSTAND = "understand"
    CORRECT = "correct"
    FIX = "fix"
    EXPLORE = "explore"
    UNCLASSIFIED = "unclassified"


class RoutedAction(Enum):
    RESPOND = "respond"                  # terminal, fast tier answered
    DISMISS_AND_RESPOND = "dismiss_and_respond"
    DEEP_FIX = "deep_fix"
    DEEP_EXPLORE = "deep_explore"


class ClarifyUnavailable(RuntimeError):
    """Deep resolution failed twice; the turn applied nothing."""


@dataclass
class ClassificationResult:
    intent: Intent
    response: str
    dismiss_insight: bool = False


def _card_context(card: InsightCard, stage: str, policies: list[Policy]) -> dict[str, str]:
    return {
        "CARD_LABEL": card.type.value,
        "STAGE_TYPE": stage,
        "CARD_ID": card.id,
        "CARD_HEADING": card.heading,
        "CARD_DESCRIPTION": card.description,
        "CARD_RATIONALE": render_rationale(card.rationale),
        "CARD_EXPECTED_OUTCOME": card.expected_outcome.value if card.expected_outcome else "n/a",
        "CARD_RELEVANT_POLICIES": ", ".join(card.relevant_policies) if card.relevant_policies else "n/a",
        "CURRENT_POLICIES": json.dumps([p.to_wire() for p in policies], indent=2),
    }


def classify_intent(
    card: InsightCard,
    user_message: str,
    stage: str,
    policies: list[Policy],
    transport: Any,
    log,
) -> ClassificationResult:
    """Fast-tier semantic intent classification with card-type bias.

    Unparseable or unknown intents map to the conservative unclassified
    bucket; a dismissal flag is honored only on correct intent.
    """
    request = ChatRequest(
        kind=CallKind.INTENT_CLASSIFICATION,
        system_prompt=render_prompt(CallKind.INTENT_CLASSIFICATION, _card_context(card, stage, policies)),
        user_parts=(TextPart(user_message),),
        schema_id="classify",
    )
    raw, _record = invoke(request, transport, log)
    try:
        parsed: ClassifyParse = parse_structured(raw, "classify")
    except SchemaError as exc:
        logger.warning("intent classification unparseable (%s); treating as unclassified", exc)
        return ClassificationResult(intent=Intent.UNCLASSIFIED, response="", dismiss_insight=False)
    intent = Intent(parsed.intent.value)
    dismiss = parsed.dismiss_insight and intent is Intent.CORRECT
    return ClassificationResult(intent=intent, response=parsed.response, dismiss_insight=dismiss)


def route(result: ClassificationResult) -> RoutedAction:
    """Intent-to-path routing; unclassified conservatively takes the fix path."""
    if result.intent is Intent.UNDERSTAND:
        return RoutedAction.RESPOND
    if result.intent is Intent.CORRECT:
        return RoutedAction.DISMISS_AND_RESPOND if result.dismiss_insight else RoutedAction.RESPOND
    if result.intent is Intent.EXPLORE:
        return RoutedAction.DEEP_EXPLORE
    return RoutedAction.DEEP_FIX  # fix and unclassified


@dataclass
class DeepResolution:
    chat: str
    policies: list[Policy]
    insights: list[InsightCard]
    generate: str | None
    proposed_actions: list[str]
    applied: bool  # False for explore: shadow only


def _resolution_problems(parsed: DeepResolutionParse, known_marks: set[int]) -> list[str]:
    problems: list[str] = []
    numbers = [p.policy_number for p in parsed.policies]
    if len(set(numbers)) != len(numbers):
        problems.append("duplicate policyNumber in policies")
    for i, policy in enumerate(parsed.policies):
        for violation in validate_policy(policy, known_marks):
            problems.append(f"policies[{i}]: {violation}")
    for i, card in enumerate(parsed.insights):
        for violation in validate_insight(card, known_marks, set(numbers)):
            problems.append(f"insights[{i}]: {violation}")
    return problems


def resolve_deep(
    session,
    card: InsightCard,
    user_message: str,
    intent: Intent,
    transport: Any,
) -> DeepResolution:
    """Frontier-tier resolution for fix/explore (unclassified rides as fix).

    Fix replaces the working policy set and merges insights; a clarified
    card the model omits counts as resolved and is dismissed with
    provenance. Explore stores the returned set as a one-deep shadow
    proposal and touches nothing else.
    """
    effective = Intent.FIX if intent is Intent.UNCLASSIFIED else intent
    if effective not in (Intent.FIX, Intent.EXPLORE):
        raise ValueError(f"deep resolution only handles fix/explore, got {intent.value}")

    context = _card_context(card, session.stage, session.policies)
    context["INTENT"] = effective.value
    context["ALL_INSIGHTS"] = json.dumps(
        [c.to_wire() for c in session.insight_ledger.active_cards()], indent=2
    )
    from .analyze import entity_context_lines

    context["CANVAS_ELEMENT_MAP"] = "\n".join(entity_context_lines(session.entities)) or "(empty)"
    system_prompt = render_prompt(CallKind.DEEP_RESOLUTION, context)
    known_marks = {m.mark_number for m in session.mark_map}

    note: str | None = None
    last_problems: list[str] = []
    for _ in range(2):
        parts = [TextPart(user_message)]
        if note:
            parts.append(TextPart(note))
        request = ChatRequest(
            kind=CallKind.DEEP_RESOLUTION,
            system_prompt=system_prompt,
            user_parts=tuple(parts),
            schema_id="deep_resolution",
        )
        raw, _record = invoke(request, transport, session.call_log)
        try:
            parsed: DeepResolutionParse = parse_structured(raw, "deep_resolution")
        except SchemaError as exc:
            last_problems = [str(exc)]
        else:
            last_problems = _resolution_problems(parsed, known_marks)
            if not last_problems:
                if effective is Intent.FIX:
                    session.policies = [p.copy() for p in parsed.policies]
                    session.insight_ledger.merge(parsed.insights)
                    returned_ids = {c.id for c in parsed.insights}
                    if card.id not in returned_ids and card.id in session.insight_ledger:
                        session.insight_ledger.dismiss(card.id, reason="resolved by fix")
                    applied = True
                else:
                    session.shadow_policies = {
                        "chat": parsed.chat,
                        "policies": [p.to_wire() for p in parsed.policies],
                        "insights": [c.to_wire() for c in parsed.insights],
                    }
                    applied = False
                return DeepResolution(
                    chat=parsed.chat,
                    policies=parsed.policies,
                    insights=parsed.insights,
                    generate=parsed.generate,
                    proposed_actions=parsed.proposed_actions,
                    applied=applied,
                )
        note = (
            "Your previous response was rejected. Fix these problems and respond again "
            "with the full JSON object: " + "; ".join(last_problems)
        )
    raise ClarifyUnavailable("; ".join(last_problems))


def propose_sketch_sync(session, resolution: DeepResolution, transport: Any) -> dict[str, Any] | None:
    """Best-effort sketch-sync proposal for a resolution's generate directive.

    Returns the pending proposal stored on the session, or None when no
    directive exists or the sync call failed (policies already applied, so
    the canvas is allowed to lag).
    """
    if not resolution.generate:
        return None
    shapes_desc = json.dumps([s.to_wire() for s in session.sketch_snapshot], indent=2)
    user = (
        f"The user's viewport is {{ x: 0, y: 0, width: 1200, height: 800 }}. "
        f"Existing shapes on canvas:\n{shapes_desc}\n\n"
        f"Directive: {resolution.generate}"
    )
    request = ChatRequest(
        kind=CallKind.SKETCH_SYNC,
        system_prompt=render_prompt(CallKind.SKETCH_SYNC),
        user_parts=(TextPart(user),),
        schema_id="sketch_sync",
    )
    raw, _record = invoke(request, transport, session.call_log)
    try:
        parsed = parse_structured(raw, "sketch_sync")
    except SchemaError as exc:
        logger.warning("sketch sync proposal dropped: %s", exc)
        session.status_notes.append(f"sketch sync unavailable: {exc}")
        return None
    proposal = {
        "directive": resolution.generate,
        "proposedActions": list(resolution.proposed_actions),
        "events": parsed.events,
        "source": "clarify",
    }
    session.pending_sketch_proposal = proposal
    return proposal
