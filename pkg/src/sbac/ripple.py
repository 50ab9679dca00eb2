"""Propagation of manual single-field policy edits.

Phase 1 spreads the edit across the policy set, phase 2 across insight
cards, mirroring the two fast-tier consistency calls. Renames are a fully
deterministic find-and-replace, so a reference oracle implements them
independently: it serves as the transport-failure fallback and, when the
model's output diverges from it, the oracle's answer wins. Description and
explanation edits skip the model entirely.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Sequence

from .policy_model import InsightCard, IssueType, Policy, Rationale
from .gateway import (
    CallKind,
    CallLog,
    ChatRequest,
    SchemaError,
    TextPart,
    TransportError,
    invoke,
    parse_structured,
    render_prompt,
)

logger = logging.getLogger(__name__)

EDITABLE_FIELDS = ("subject", "resource", "action", "context", "description", "explanation")

UPDATED_MARKER = " [Updated]"
EDIT_MARKER_RE = re.compile(r" \[Edit: [^\]]*\]$")


class EditType(Enum):
    RENAME_SUBJECT = "rename_subject"
    RENAME_RESOURCE = "rename_resource"
    ACTION_CHANGE = "action_change"
    CONTEXT_CHANGE = "context_change"
    TEXT_ONLY = "text_only"

    @property
    def is_rename(self) -> bool:
        return self in (EditType.RENAME_SUBJECT, EditType.RENAME_RESOURCE)


_EDIT_TYPE_BY_FIELD = {
    "subject": EditType.RENAME_SUBJECT,
    "resource": EditType.RENAME_RESOURCE,
    "action": EditType.ACTION_CHANGE,
    "context": EditType.CONTEXT_CHANGE,
    "description": EditType.TEXT_ONLY,
    "explanation": EditType.TEXT_ONLY,
}


class NoOpEdit(ValueError):
    pass


@dataclass(frozen=True)
class EditDescriptor:
    policy_number: str
    field: str
    old_value: str
    new_value: str
    edit_type: EditType


def classify_edit(field_name: str, old_value: str, new_value: str) -> EditType:
    """Deterministic field-to-propagation-rule mapping."""
    if field_name not in EDITABLE_FIELDS:
        raise ValueError(f"not an editable policy field: {field_name!r}")
    if old_value == new_value:
        raise NoOpEdit(f"{field_name} unchanged")
    return _EDIT_TYPE_BY_FIELD[field_name]


def describe_edit(policy_number: str, field_name: str, old_value: str, new_value: str) -> EditDescriptor:
    return EditDescriptor(
        policy_number=policy_number,
        field=field_name,
        old_value=old_value,
        new_value=new_value,
        edit_type=classify_edit(field_name, old_value, new_value),
    )


@dataclass
class RippleResult:
    has_ripple: bool
    summary: str
    policies: list[Policy]
    degraded: bool = False
    source: str = "model"  # model | oracle | fast-path | fallback-original


@dataclass
class InsightRippleResult:
    has_changes: bool
    summary: str
    insights: list[InsightCard]
    degraded: bool = False
    source: str = "model"
    skipped: bool = False


def _token_replace(text: str, old: str, new: str) -> str:
    # Whole-token, case-sensitive: "Camera" must not touch "Cameras".
    pattern = re.compile(r"(?<![A-Za-z0-9_])" + re.escape(old) + r"(?![A-Za-z0-9_])")
    return pattern.sub(new, text)


def reference_oracle(edit: EditDescriptor, policies: Sequence[Policy]) -> RippleResult:
    """Deterministic phase-1 propagation for rename and text-only edits.

    Pure and idempotent; never touches policyNumber or elements.
    """
    if not (edit.edit_type.is_rename or edit.edit_type is EditType.TEXT_ONLY):
        raise ValueError(f"oracle only handles renames and text edits, not {edit.edit_type.value}")

    if edit.edit_type is EditType.TEXT_ONLY:
        return RippleResult(
            has_ripple=False,
            summary=f"Edited {edit.field} of {edit.policy_number}; no cross-policy effects",
            policies=[p.copy() for p in policies],
            source="fast-path",
        )

    out: list[Policy] = []
    changed = 0
    for policy in policies:
        updated = policy.copy()
        touched = False
        for name in EDITABLE_FIELDS:
            before = getattr(updated, name)
            after = _token_replace(before, edit.old_value, edit.new_value)
            if after != before:
                setattr(updated, name, after)
                touched = True
        if touched:
            changed += 1
        out.append(updated)
    return RippleResult(
        has_ripple=changed > 0,
        summary=f"Renamed '{edit.old_value}' to '{edit.new_value}' across {changed} policies",
        policies=out,
        source="oracle",
    )


def oracle_insights(edit: EditDescriptor, cards: Sequence[InsightCard]) -> InsightRippleResult:
    """Deterministic phase-2 rename propagation: silent name swap, no markers."""
    if not edit.edit_type.is_rename:
        raise ValueError("insight oracle only handles renames")
    out: list[InsightCard] = []
    changed = 0
    for card in cards:
        updated = card.copy()
        updated.heading = _token_replace(card.heading, edit.old_value, edit.new_value)
        updated.description = _token_replace(card.description, edit.old_value, edit.new_value)
        updated.rationale = Rationale(
            happening=_token_replace(card.rationale.happening, edit.old_value, edit.new_value),
            expected=_token_replace(card.rationale.expected, edit.old_value, edit.new_value),
            consequence=_token_replace(card.rationale.consequence, edit.old_value, edit.new_value),
            consequence_kind=card.rationale.consequence_kind,
        )
        if updated != card:
            changed += 1
        out.append(updated)
    return InsightRippleResult(
        has_changes=changed > 0,
        summary=f"Renamed '{edit.old_value}' to '{edit.new_value}' in {changed} insights",
        insights=out,
        source="oracle",
    )


def _edit_payload(edit: EditDescriptor) -> dict[str, str]:
    return {
        "policyNumber": edit.policy_number,
        "editedField": edit.field,
        "oldValue": edit.old_value,
        "newValue": edit.new_value,
        "editType": edit.edit_type.value.upper(),
    }


def _policy_text_equal(a: Policy, b: Policy) -> bool:
    return a.text_fields() == b.text_fields()


def propagate_policies(
    edit: EditDescriptor,
    policies: Sequence[Policy],
    transport: Any,
    log: CallLog,
) -> RippleResult:
    """Phase 1: spread one field edit across the policy set.

    The input list already carries the user's field edit (the edit is
    policy truth the moment it is typed); this call fixes up everything
    that mentions the old value. Count-validation failures fall back to
    the input arrays; transport failures fall back to the oracle for
    renames. Model output that diverges from the oracle on a rename loses
    to the oracle.
    """
    originals = [p.copy() for p in policies]
    if edit.edit_type is EditType.TEXT_ONLY:
        return RippleResult(
            has_ripple=False,
            summary=f"Edited {edit.field} of {edit.policy_number}; no cross-policy effects",
            policies=originals,
            source="fast-path",
        )

    user_doc = {
        "edit": _edit_payload(edit),
        "policies": [p.to_wire() for p in policies],
    }
    request = ChatRequest(
        kind=CallKind.POLICY_PROPAGATION,
        system_prompt=render_prompt(CallKind.POLICY_PROPAGATION),
        user_parts=(TextPart(json.dumps(user_doc, indent=2)),),
        schema_id="propagate_policies",
    )
    try:
        raw, _record = invoke(request, transport, log)
        parsed = parse_structured(raw, "propagate_policies")
    except (TransportError, SchemaError) as exc:
        if edit.edit_type.is_rename:
            result = reference_oracle(edit, originals)
            logger.warning("policy propagation failed (%s); using rename oracle", exc)
            return result
        return RippleResult(
            has_ripple=False,
            summary=f"Propagation unavailable ({exc}); kept original policies",
            policies=originals,
            degraded=True,
            source="fallback-original",
        )

    if len(parsed.policies) < len(originals):
        return RippleResult(
            has_ripple=False,
            summary="Model returned fewer policies than sent; kept original policies",
            policies=originals,
            degraded=True,
            source="fallback-original",
        )
    by_number = {p.policy_number: p for p in parsed.policies}
    if set(by_number) != {p.policy_number for p in originals}:
        return RippleResult(
            has_ripple=False,
            summary="Model changed policy numbering; kept original policies",
            policies=originals,
            degraded=True,
            source="fallback-original",
        )

    if edit.edit_type.is_rename:
        oracle = reference_oracle(edit, originals)
        merged: list[Policy] = []
        diverged = False
        for original, expected in zip(originals, oracle.policies):
            got = by_number[original.policy_number]
            if not _policy_text_equal(got, expected):
                diverged = True
            merged.append(expected)
        if diverged:
            logger.warning("rename propagation diverged from oracle; oracle output wins")
        return RippleResult(
            has_ripple=oracle.has_ripple,
            summary=oracle.summary if diverged else parsed.summary,
            policies=merged,
            source="oracle" if diverged else "model",
        )

    # Action/context change: only the edited policy's description and
    # explanation may move; everything else is pinned to the input.
    merged = []
    changed = False
    for original in originals:
        updated = original.copy()
        if original.policy_number == edit.policy_number:
            got = by_number[original.policy_number]
            updated.description = got.description
            updated.explanation = got.explanation
            changed = changed or not _policy_text_equal(updated, original)
        merged.append(updated)
    return RippleResult(
        has_ripple=changed,
        summary=parsed.summary,
        policies=merged,
        source="model",
    )


def _strip_updated(heading: str) -> str:
    return heading[: -len(UPDATED_MARKER)] if heading.endswith(UPDATED_MARKER) else heading


def _merge_marked_card(base: InsightCard, got: InsightCard, phase1_summary: str) -> InsightCard:
    """Pin identity fields; allow only exactly-once markers and, for
    vignettes, an outcome correction."""
    updated = base.copy()
    if got.expected_outcome is not None and base.type is IssueType.VIGNETTE:
        updated.expected_outcome = got.expected_outcome

    desc_core = EDIT_MARKER_RE.sub("", base.description)
    got_desc_core = EDIT_MARKER_RE.sub("", got.description)
    signaled = got.heading != base.heading or got.description != base.description

    if signaled:
        if not updated.heading.endswith(UPDATED_MARKER):
            updated.heading = updated.heading + UPDATED_MARKER
        if not EDIT_MARKER_RE.search(updated.description):
            if got_desc_core == desc_core and got.description.startswith(desc_core):
                suffix = got.description[len(desc_core):]
                marker = suffix if EDIT_MARKER_RE.fullmatch(suffix) else f" [Edit: may be affected by {phase1_summary}]"
            else:
                marker = f" [Edit: may be affected by {phase1_summary}]"
            updated.description = desc_core + marker
    return updated


def propagate_insights(
    edit: EditDescriptor,
    phase1: RippleResult,
    cards: Sequence[InsightCard],
    transport: Any,
    log: CallLog,
) -> InsightRippleResult:
    """Phase 2: update insight cards after a phase-1 ripple.

    Runs only when phase 1 actually changed something and cards exist.
    Renames are silent swaps (oracle semantics); action/context changes
    append " [Updated]" / " [Edit: ...]" markers exactly once per card.
    Identity fields and acceptance state are pinned to the input.
    """
    originals = [c.copy() for c in cards]
    if not phase1.has_ripple or not originals:
        return InsightRippleResult(
            has_changes=False,
            summary="skipped: no cross-policy effects or no insights",
            insights=originals,
            skipped=True,
            source="fast-path",
        )

    user_doc = {
        "edit": _edit_payload(edit),
        "phase1Summary": phase1.summary,
        "insights": [c.to_wire() for c in originals],
    }
    request = ChatRequest(
        kind=CallKind.INSIGHT_PROPAGATION,
        system_prompt=render_prompt(CallKind.INSIGHT_PROPAGATION),
        user_parts=(TextPart(json.dumps(user_doc, indent=2)),),
        schema_id="propagate_insights",
    )
    try:
        raw, _record = invoke(request, transport, log)
        parsed = parse_structured(raw, "propagate_insights")
    except (TransportError, SchemaError) as exc:
        if edit.edit_type.is_rename:
            result = oracle_insights(edit, originals)
            logger.warning("insight propagation failed (%s); using rename oracle", exc)
            return result
        return InsightRippleResult(
            has_changes=False,
            summary=f"Propagation unavailable ({exc}); kept original insights",
            insights=originals,
            degraded=True,
            source="fallback-original",
        )

    if len(parsed.insights) < len(originals):
        return InsightRippleResult(
            has_changes=False,
            summary="Model returned fewer insights than sent; kept original insights",
            insights=originals,
            degraded=True,
            source="fallback-original",
        )
    by_id = {c.id: c for c in parsed.insights}
    if set(by_id) != {c.id for c in originals}:
        return InsightRippleResult(
            has_changes=False,
            summary="Model changed insight ids; kept original insights",
            insights=originals,
            degraded=True,
            source="fallback-original",
        )

    if edit.edit_type.is_rename:
        oracle = oracle_insights(edit, originals)
        diverged = any(
            by_id[base.id].to_wire() != expected.to_wire()
            for base, expected in zip(originals, oracle.insights)
        )
        if diverged:
            logger.warning("rename insight propagation diverged from oracle; oracle output wins")
            return oracle
        return InsightRippleResult(
            has_changes=oracle.has_changes,
            summary=parsed.summary,
            insights=oracle.insights,
            source="model",
        )

    merged = [
        _merge_marked_card(base, by_id[base.id], phase1.summary) for base in originals
    ]
    has_changes = any(m.to_wire() != o.to_wire() for m, o in zip(merged, originals))
    return InsightRippleResult(
        has_changes=has_changes,
        summary=parsed.summary,
        insights=merged,
        source="model",
    )
