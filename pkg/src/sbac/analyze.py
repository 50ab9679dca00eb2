"""Analyze-stage orchestration: context building, the analysis call, and
the insight ledger's merge/lifecycle rules.

The ledger is strictly monotone: ids are never reused, dismissed cards
stay in history (excluded from prompt context), and acceptance is never
silently cleared. Analysis responses replace the working policy set
wholesale but merge into the ledger, so a forgetful model never deletes a
finding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable

from .mark_model import Entity
from .policy_model import (
    InsightCard,
    Policy,
    validate_insight,
    validate_policy,
)
from .gateway import (
    AnalyzeParse,
    CallKind,
    ChatRequest,
    ImagePart,
    ImagePurpose,
    NextAction,
    SchemaError,
    TextPart,
    invoke,
    parse_structured,
    render_prompt,
)


class StageError(RuntimeError):
    pass


class AnalysisUnavailable(RuntimeError):
    """Both attempts failed; the session keeps its prior state."""


class UnknownInsight(KeyError):
    pass


class DuplicateTypePrefixMismatch(ValueError):
    """An incoming card reuses a known id with a different type."""


class Lifecycle(Enum):
    ACTIVE = "active"
    ACCEPTED = "accepted"
    DISMISSED = "dismissed"


@dataclass
class LedgerEntry:
    card: InsightCard
    lifecycle: Lifecycle = Lifecycle.ACTIVE
    dismiss_reason: str | None = None

    def to_wire(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"card": self.card.to_wire(), "lifecycle": self.lifecycle.value}
        if self.dismiss_reason is not None:
            doc["dismissReason"] = self.dismiss_reason
        return doc


class InsightLedger:
    """Ordered id -> (card, lifecycle) map with monotone transitions."""

    def __init__(self) -> None:
        self._entries: dict[str, LedgerEntry] = {}

    def __contains__(self, card_id: str) -> bool:
        return card_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, card_id: str) -> LedgerEntry:
        if card_id not in self._entries:
            raise UnknownInsight(card_id)
        return self._entries[card_id]

    def entries(self) -> list[LedgerEntry]:
        return list(self._entries.values())

    def active_cards(self) -> list[InsightCard]:
        """Cards shown to the user and to prompts: active plus accepted."""
        return [
            e.card for e in self._entries.values() if e.lifecycle is not Lifecycle.DISMISSED
        ]

    def dismissed_ids(self) -> list[str]:
        return [
            e.card.id for e in self._entries.values() if e.lifecycle is Lifecycle.DISMISSED
        ]

    def all_ids(self) -> list[str]:
        return list(self._entries)

    def merge(self, incoming: Iterable[InsightCard]) -> None:
        """Fold an analysis/resolution response into the ledger.

        Known ids update card content (never lifecycle); dismissed cards
        are left untouched so a re-emitting model cannot resurrect them;
        unknown ids append as active. Acceptance state belongs to the
        ledger, not to model output.
        """
        for card in incoming:
            existing = self._entries.get(card.id)
            if existing is None:
                stored = card.copy()
                stored.is_accepted = None
                self._entries[card.id] = LedgerEntry(card=stored)
                continue
            if existing.card.type is not card.type:
                raise DuplicateTypePrefixMismatch(
                    f"{card.id}: arrived as {card.type.value}, known as {existing.card.type.value}"
                )
            if existing.lifecycle is Lifecycle.DISMISSED:
                continue
            updated = card.copy()
            updated.is_accepted = existing.card.is_accepted
            existing.card = updated

    def set_state(self, card_id: str, action: str) -> LedgerEntry:
        """Apply an explicit user action: "accept" or "dismiss"."""
        entry = self.get(card_id)
        if action == "accept":
            if entry.lifecycle is Lifecycle.DISMISSED:
                raise UnknownInsight(card_id)  # no longer in the active view
            entry.lifecycle = Lifecycle.ACCEPTED
            entry.card.is_accepted = True
        elif action == "dismiss":
            entry.lifecycle = Lifecycle.DISMISSED
        else:
            raise ValueError(f"unknown action {action!r}")
        return entry

    def dismiss(self, card_id: str, reason: str | None = None) -> None:
        entry = self.get(card_id)
        entry.lifecycle = Lifecycle.DISMISSED
        entry.dismiss_reason = reason

    def update_cards(self, cards: Iterable[InsightCard]) -> None:
        """Replace card content for known ids (ripple phase 2 output)."""
        for card in cards:
            if card.id in self._entries:
                entry = self._entries[card.id]
                updated = card.copy()
                updated.is_accepted = entry.card.is_accepted
                entry.card = updated

    def to_wire(self) -> dict[str, Any]:
        return {"entries": [e.to_wire() for e in self._entries.values()]}

    @classmethod
    def from_wire(cls, doc: dict[str, Any]) -> InsightLedger:
        from .policy_model import insight_from_wire

        ledger = cls()
        for raw in doc.get("entries", []):
            card = insight_from_wire(raw["card"], strict=False)
            entry = LedgerEntry(
                card=card,
                lifecycle=Lifecycle(raw["lifecycle"]),
                dismiss_reason=raw.get("dismissReason"),
            )
            ledger._entries[card.id] = entry
        return ledger


def set_insight_state(ledger: InsightLedger, card_id: str, action: str) -> LedgerEntry:
    return ledger.set_state(card_id, action)


def merge_insights(ledger: InsightLedger, incoming: Iterable[InsightCard]) -> InsightLedger:
    ledger.merge(incoming)
    return ledger


def entity_context_lines(entities: Iterable[Entity]) -> list[str]:
    """Render entities as the "[N] Role: Label" lines prompts consume."""
    return [
        f"[{e.entity_id}] {e.role.value.capitalize()}: {e.label}" for e in entities
    ]


@dataclass
class AnalysisContext:
    scenario_context: str
    entity_lines: list[str]
    policies: list[Policy]
    active_insights: list[InsightCard]
    dismissed_ids: list[str]
    clarification_lines: list[str]
    known_marks: set[int]

    def user_text(self) -> str:
        sections = [
            "Canvas Element Map:\n" + ("\n".join(self.entity_lines) or "(empty)"),
            "Current policies:\n" + json.dumps([p.to_wire() for p in self.policies], indent=2),
            "Current insights:\n" + json.dumps([c.to_wire() for c in self.active_insights], indent=2),
        ]
        if self.dismissed_ids:
            sections.append("Insights dismissed by user (do not re-raise): " + ", ".join(self.dismissed_ids))
        if self.clarification_lines:
            sections.append("Clarification history:\n" + "\n".join(self.clarification_lines))
        return "\n\n".join(sections)


def build_analysis_context(session) -> AnalysisContext:
    """Assemble everything the analysis call needs from session state.

    Raises StageError when no identification exists yet (empty canvas or
    analysis requested before phase entry).
    """
    if session.identification is None or not session.entities:
        raise StageError("no identification available; enter the analyze stage first")
    history = [
        f"[{turn['cardId']}] user: {turn['userMessage']} -> ({turn['intent']}) {turn['response']}"
        for turn in session.clarification_history
    ]
    return AnalysisContext(
        scenario_context=session.scenario_context,
        entity_lines=entity_context_lines(session.entities),
        policies=list(session.policies),
        active_insights=session.insight_ledger.active_cards(),
        dismissed_ids=session.insight_ledger.dismissed_ids(),
        clarification_lines=history,
        known_marks={m.mark_number for m in session.mark_map},
    )


@dataclass
class AnalyzeOutcome:
    chat: str
    generate: str | None
    next_action: NextAction
    policies: list[Policy]
    insights: list[InsightCard]


def _semantic_problems(parsed: AnalyzeParse, known_marks: set[int]) -> list[str]:
    problems: list[str] = []
    numbers = [p.policy_number for p in parsed.policies]
    if len(set(numbers)) != len(numbers):
        problems.append("duplicate policyNumber in policies")
    for i, policy in enumerate(parsed.policies):
        for violation in validate_policy(policy, known_marks):
            problems.append(f"policies[{i}]: {violation}")
    policy_numbers = set(numbers)
    for i, card in enumerate(parsed.insights):
        for violation in validate_insight(card, known_marks, policy_numbers):
            problems.append(f"insights[{i}]: {violation}")
    return problems


def run_analysis(session, transport, som_png: bytes) -> AnalyzeOutcome:
    """Run one analysis turn and apply it to the session.

    A schema or validation failure earns exactly one corrective re-ask; a
    second failure raises AnalysisUnavailable and leaves prior policies
    and insights untouched. On success the policy working set is replaced
    and insights merge into the ledger.
    """
    context = build_analysis_context(session)
    system_prompt = render_prompt(
        CallKind.CI_ANALYSIS, {"SCENARIO_CONTEXT": context.scenario_context}
    )
    note: str | None = None
    last_problems: list[str] = []
    for _ in range(2):
        parts: list[TextPart | ImagePart] = [TextPart(context.user_text())]
        if note:
            parts.append(TextPart(note))
        parts.append(ImagePart(som_png, ImagePurpose.SOM))
        request = ChatRequest(
            kind=CallKind.CI_ANALYSIS,
            system_prompt=system_prompt,
            user_parts=tuple(parts),
            schema_id="analyze",
        )
        raw, _record = invoke(request, transport, session.call_log)
        try:
            parsed: AnalyzeParse = parse_structured(raw, "analyze")
        except SchemaError as exc:
            last_problems = [str(exc)]
        else:
            last_problems = _semantic_problems(parsed, context.known_marks)
            if not last_problems:
                session.policies = [p.copy() for p in parsed.policies]
                session.insight_ledger.merge(parsed.insights)
                if parsed.generate:
                    session.pending_sketch_proposal = {
                        "directive": parsed.generate,
                        "proposedActions": [],
                        "events": None,
                        "source": "analysis",
                    }
                session.suggested_next_action = parsed.next_action.value
                return AnalyzeOutcome(
                    chat=parsed.chat,
                    generate=parsed.generate,
                    next_action=parsed.next_action,
                    policies=list(session.policies),
                    insights=session.insight_ledger.active_cards(),
                )
        note = (
            "Your previous response was rejected. Fix these problems and respond again "
            "with the full JSON object: " + "; ".join(last_problems)
        )
    raise AnalysisUnavailable("; ".join(last_problems))
