"""Core policy vocabulary: ABAC policies, insight cards, and the structured rationale format.

Every other module builds on the types and validators here. Two wire modes
exist for the JSON document encoding: ``strict`` (model output; unknown
fields rejected) and storage mode (unknown fields preserved so stored
sessions round-trip byte-stable).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

# Mark references look like "[3]". They are only legal inside the elements
# array; any occurrence in a prose field is a violation.
MARK_REF_RE = re.compile(r"\[[0-9]+\]")

POLICY_NUMBER_RE = re.compile(r"^policy[1-9][0-9]*$")

MAX_HEADING_LEN = 120

POLICY_WIRE_FIELDS = (
    "policyNumber",
    "description",
    "explanation",
    "subject",
    "resource",
    "action",
    "context",
    "elements",
)

INSIGHT_WIRE_FIELDS = (
    "id",
    "type",
    "heading",
    "description",
    "elements",
    "rationale",
    "isAccepted",
    "expectedOutcome",
    "relevantPolicies",
)


class IssueType(Enum):
    RISK = "risk"
    AMBIGUITY = "ambiguity"
    CONFLICT = "conflict"
    VIGNETTE = "vignette"


class ExpectedOutcome(Enum):
    ALLOW = "Allow"
    DENY = "Deny"
    AMBIGUOUS = "Ambiguous"


class ConsequenceKind(Enum):
    WHY_IT_MATTERS = "Why it matters"
    WHAT_THIS_TESTS = "What this tests"


class RiskPattern(Enum):
    """Specification-time risk patterns, each tagged with its CWE."""

    OVER_PRIVILEGE = ("over_privilege", "CWE-285")
    PRIVILEGE_ESCALATION = ("privilege_escalation", "CWE-285")
    MISSING_AUTHORIZATION = ("missing_authorization", "CWE-862")
    INSECURE_DEFAULTS = ("insecure_defaults", "CWE-276")
    INDIRECT_ACCESS_PATH = ("indirect_access_path", "CWE-284")
    MISSING_INSTANCE_SCOPING = ("missing_instance_scoping", "CWE-639")
    TRUST_BOUNDARY_VIOLATION = ("trust_boundary_violation", "CWE-668")

    def __init__(self, key: str, cwe: str) -> None:
        self.key = key
        self.cwe = cwe


class MalformedRationale(ValueError):
    """Rationale string does not match the three-segment pipe format."""


class EmptySegment(ValueError):
    """A rationale segment is empty."""


_HAPPENING_LABEL = "What's happening"
_EXPECTED_LABEL = "What's expected"


@dataclass(frozen=True)
class Rationale:
    """Three-part structured rationale carried by every insight card.

    Serialized form:
    ``What's happening: <h> | What's expected: <e> | <label>: <c>``
    where the third label is "Why it matters" for risks, ambiguities and
    conflicts, and "What this tests" for vignettes.
    """

    happening: str
    expected: str
    consequence: str
    consequence_kind: ConsequenceKind = ConsequenceKind.WHY_IT_MATTERS


def render_rationale(r: Rationale) -> str:
    for name, value in (
        ("happening", r.happening),
        ("expected", r.expected),
        ("consequence", r.consequence),
    ):
        if not value.strip():
            raise EmptySegment(f"rationale segment {name!r} is empty")
    return (
        f"{_HAPPENING_LABEL}: {r.happening}"
        f" | {_EXPECTED_LABEL}: {r.expected}"
        f" | {r.consequence_kind.value}: {r.consequence}"
    )


def parse_rationale(s: str) -> Rationale:
    """Parse the serialized three-segment rationale.

    Raises MalformedRationale on wrong segment count or an unrecognized
    third label; round-trips with render_rationale on valid input.
    """
    segments = s.split(" | ")
    if len(segments) != 3:
        raise MalformedRationale(
            f"expected 3 segments separated by ' | ', got {len(segments)}"
        )
    happening = _strip_label(segments[0], _HAPPENING_LABEL)
    expected = _strip_label(segments[1], _EXPECTED_LABEL)
    third = segments[2]
    for kind in ConsequenceKind:
        prefix = f"{kind.value}: "
        if third.startswith(prefix):
            return Rationale(happening, expected, third[len(prefix):], kind)
    raise MalformedRationale(f"unrecognized third segment label in {third!r}")


def _strip_label(segment: str, label: str) -> str:
    prefix = f"{label}: "
    if not segment.startswith(prefix):
        raise MalformedRationale(f"segment does not start with {prefix!r}: {segment!r}")
    return segment[len(prefix):]


@dataclass
class Policy:
    """One ABAC rule: Who (subject) / Action / What (resource) / When (context).

    ``context`` is the literal string "None" when the rule is unconditional.
    ``elements`` holds mark references of the form "[N]" tying the rule back
    to sketch shapes; prose fields must never contain such references.
    """

    policy_number: str
    description: str
    explanation: str
    subject: str
    resource: str
    action: str
    context: str
    elements: list[str] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def to_wire(self) -> dict[str, Any]:
        doc = {
            "policyNumber": self.policy_number,
            "description": self.description,
            "explanation": self.explanation,
            "subject": self.subject,
            "resource": self.resource,
            "action": self.action,
            "context": self.context,
            "elements": list(self.elements),
        }
        doc.update(self.extra)
        return doc

    def text_fields(self) -> dict[str, str]:
        """The six prose/value fields an edit may touch (not number/elements)."""
        return {
            "description": self.description,
            "explanation": self.explanation,
            "subject": self.subject,
            "resource": self.resource,
            "action": self.action,
            "context": self.context,
        }

    def copy(self) -> Policy:
        return replace(self, elements=list(self.elements), extra=dict(self.extra))


class WireFormatError(ValueError):
    """A JSON document does not match the wire contract."""

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


def _require_str(doc: dict[str, Any], key: str, path: str) -> str:
    if key not in doc:
        raise WireFormatError(f"{path}.{key}", "missing required field")
    value = doc[key]
    if not isinstance(value, str):
        raise WireFormatError(f"{path}.{key}", f"expected string, got {type(value).__name__}")
    return value


def _require_elements(doc: dict[str, Any], path: str) -> list[str]:
    if "elements" not in doc:
        raise WireFormatError(f"{path}.elements", "missing required field")
    value = doc["elements"]
    if not isinstance(value, list) or not all(isinstance(e, str) for e in value):
        raise WireFormatError(f"{path}.elements", "expected a list of strings")
    return list(value)


def policy_from_wire(doc: dict[str, Any], *, strict: bool = True, path: str = "policy") -> Policy:
    """Decode a policy document.

    strict=True is the model-output contract: unknown fields are rejected.
    strict=False is storage mode: unknown fields are kept and re-emitted.
    """
    if not isinstance(doc, dict):
        raise WireFormatError(path, "expected an object")
    unknown = {k: v for k, v in doc.items() if k not in POLICY_WIRE_FIELDS}
    if strict and unknown:
        raise WireFormatError(f"{path}.{sorted(unknown)[0]}", "unknown field")
    return Policy(
        policy_number=_require_str(doc, "policyNumber", path),
        description=_require_str(doc, "description", path),
        explanation=_require_str(doc, "explanation", path),
        subject=_require_str(doc, "subject", path),
        resource=_require_str(doc, "resource", path),
        action=_require_str(doc, "action", path),
        context=_require_str(doc, "context", path),
        elements=_require_elements(doc, path),
        extra={} if strict else unknown,
    )


@dataclass
class InsightCard:
    """A surfaced finding: risk, ambiguity, conflict, or test vignette.

    Vignettes (and only vignettes) carry an expected outcome and the list
    of policies they exercise.
    """

    id: str
    type: IssueType
    heading: str
    description: str
    elements: list[str]
    rationale: Rationale
    is_accepted: bool | None = None
    expected_outcome: ExpectedOutcome | None = None
    relevant_policies: list[str] | None = None
    extra: dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def to_wire(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "id": self.id,
            "type": self.type.value,
            "heading": self.heading,
            "description": self.description,
            "elements": list(self.elements),
            "rationale": render_rationale(self.rationale),
        }
        if self.is_accepted is not None:
            doc["isAccepted"] = self.is_accepted
        if self.expected_outcome is not None:
            doc["expectedOutcome"] = self.expected_outcome.value
        if self.relevant_policies is not None:
            doc["relevantPolicies"] = list(self.relevant_policies)
        doc.update(self.extra)
        return doc

    def copy(self) -> InsightCard:
        return replace(
            self,
            elements=list(self.elements),
            relevant_policies=None if self.relevant_policies is None else list(self.relevant_policies),
            extra=dict(self.extra),
        )


def insight_from_wire(doc: dict[str, Any], *, strict: bool = True, path: str = "insight") -> InsightCard:
    if not isinstance(doc, dict):
        raise WireFormatError(path, "expected an object")
    unknown = {k: v for k, v in doc.items() if k not in INSIGHT_WIRE_FIELDS}
    if strict and unknown:
        raise WireFormatError(f"{path}.{sorted(unknown)[0]}", "unknown field")

    raw_type = _require_str(doc, "type", path)
    try:
        issue_type = IssueType(raw_type)
    except ValueError:
        raise WireFormatError(f"{path}.type", f"unknown issue type {raw_type!r}") from None

    try:
        rationale = parse_rationale(_require_str(doc, "rationale", path))
    except MalformedRationale as exc:
        raise WireFormatError(f"{path}.rationale", str(exc)) from None

    is_accepted = doc.get("isAccepted")
    if is_accepted is not None and not isinstance(is_accepted, bool):
        raise WireFormatError(f"{path}.isAccepted", "expected a boolean")
    if is_accepted is False:
        # False is never written by this system; normalize a model echo of
        # it back to the unset state.
        is_accepted = None

    expected_outcome = None
    if "expectedOutcome" in doc:
        raw = doc["expectedOutcome"]
        try:
            expected_outcome = ExpectedOutcome(raw)
        except ValueError:
            raise WireFormatError(f"{path}.expectedOutcome", f"unknown outcome {raw!r}") from None

    relevant_policies = None
    if "relevantPolicies" in doc:
        raw = doc["relevantPolicies"]
        if not isinstance(raw, list) or not all(isinstance(p, str) for p in raw):
            raise WireFormatError(f"{path}.relevantPolicies", "expected a list of strings")
        relevant_policies = list(raw)

    return InsightCard(
        id=_require_str(doc, "id", path),
        type=issue_type,
        heading=_require_str(doc, "heading", path),
        description=_require_str(doc, "description", path),
        elements=_require_elements(doc, path),
        rationale=rationale,
        is_accepted=is_accepted,
        expected_outcome=expected_outcome,
        relevant_policies=relevant_policies,
        extra={} if strict else unknown,
    )


@dataclass(frozen=True)
class Violation:
    """One validator finding. Violations are data, not failures."""

    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


def _check_mark_refs(refs: list[str], known_marks: set[int] | None, field_name: str) -> list[Violation]:
    out: list[Violation] = []
    for ref in refs:
        m = MARK_REF_RE.fullmatch(ref)
        if m is None or int(ref[1:-1]) < 1:
            out.append(Violation(field_name, f"malformed mark reference {ref!r}"))
        elif known_marks is not None and int(ref[1:-1]) not in known_marks:
            out.append(Violation(field_name, f"unknown mark reference {ref}"))
    return out


def validate_policy(p: Policy, known_marks: set[int] | None = None) -> list[Violation]:
    """Check every policy invariant; an empty report means valid.

    known_marks, when given, is the set of mark numbers currently on the
    canvas; element references outside it are flagged.
    """
    report: list[Violation] = []
    if not POLICY_NUMBER_RE.fullmatch(p.policy_number):
        report.append(Violation("policyNumber", f"must match 'policy<N>', got {p.policy_number!r}"))
    for name, value in p.text_fields().items():
        if not value.strip():
            report.append(Violation(name, "must be non-empty"))
        elif MARK_REF_RE.search(value):
            report.append(Violation(name, "mark reference in text field"))
    report.extend(_check_mark_refs(p.elements, known_marks, "elements"))
    return report


def validate_insight(
    card: InsightCard,
    known_marks: set[int] | None = None,
    policy_numbers: set[str] | None = None,
) -> list[Violation]:
    """Check insight-card invariants, including the vignette-only fields."""
    report: list[Violation] = []
    if not card.id.startswith(card.type.value):
        report.append(Violation("id", f"prefix of {card.id!r} does not match type {card.type.value!r}"))
    elif not re.fullmatch(re.escape(card.type.value) + r"[1-9][0-9]*", card.id):
        report.append(Violation("id", f"expected '{card.type.value}<N>', got {card.id!r}"))
    if not card.heading.strip():
        report.append(Violation("heading", "must be non-empty"))
    elif len(card.heading) > MAX_HEADING_LEN:
        report.append(Violation("heading", f"longer than {MAX_HEADING_LEN} characters"))
    if not card.description.strip():
        report.append(Violation("description", "must be non-empty"))

    is_vignette = card.type is IssueType.VIGNETTE
    if is_vignette:
        if card.expected_outcome is None:
            report.append(Violation("expectedOutcome", "required for vignettes"))
        if card.relevant_policies is None:
            report.append(Violation("relevantPolicies", "required for vignettes"))
        elif policy_numbers is not None:
            for pn in card.relevant_policies:
                if pn not in policy_numbers:
                    report.append(Violation("relevantPolicies", f"unknown policyNumber {pn!r}"))
        if card.rationale.consequence_kind is not ConsequenceKind.WHAT_THIS_TESTS:
            report.append(Violation("rationale", "vignette rationale must use 'What this tests'"))
    else:
        if card.expected_outcome is not None:
            report.append(Violation("expectedOutcome", "only vignettes carry an expected outcome"))
        if card.relevant_policies is not None:
            report.append(Violation("relevantPolicies", "only vignettes carry relevant policies"))
        if card.rationale.consequence_kind is not ConsequenceKind.WHY_IT_MATTERS:
            report.append(Violation("rationale", "insight rationale must use 'Why it matters'"))

    for name in ("heading", "description"):
        if MARK_REF_RE.search(getattr(card, name)):
            report.append(Violation(name, "mark reference in text field"))
    report.extend(_check_mark_refs(card.elements, known_marks, "elements"))
    return report


class FindingFlag(Enum):
    """How a draft finding was flagged during analysis."""

    DANGER_AS_WRITTEN = "dangerAsWritten"
    NEEDS_MORE_INFORMATION = "needsMoreInformation"
    CONTRADICTORY_DECISIONS = "contradictoryDecisions"


_FLAG_TO_ISSUE = {
    FindingFlag.DANGER_AS_WRITTEN: IssueType.RISK,
    FindingFlag.NEEDS_MORE_INFORMATION: IssueType.AMBIGUITY,
    FindingFlag.CONTRADICTORY_DECISIONS: IssueType.CONFLICT,
}


def classify_issue_kind(flag: FindingFlag) -> IssueType:
    """Map a draft finding's flag to its issue category.

    A known danger is a risk; a question that needs the user is an
    ambiguity; contradictory decisions are a conflict.
    """
    return _FLAG_TO_ISSUE[flag]


# Keyword heuristics for tagging risk cards with a pattern. Reporting only:
# a missed or extra tag never blocks anything.
_RISK_PATTERN_KEYWORDS: list[tuple[RiskPattern, tuple[str, ...]]] = [
    (RiskPattern.PRIVILEGE_ESCALATION, ("escalat", "configure security", "manage settings")),
    (RiskPattern.MISSING_AUTHORIZATION, ("no policy restrict", "missing authorization", "unrestricted")),
    (RiskPattern.INSECURE_DEFAULTS, ("no policy exists", "no policy covers", "default permission", "undefined access")),
    (RiskPattern.INDIRECT_ACCESS_PATH, ("bypass", "indirect", "alternative route")),
    (RiskPattern.MISSING_INSTANCE_SCOPING, ("all cameras", "all devices", "every instance", "which instances")),
    (RiskPattern.TRUST_BOUNDARY_VIOLATION, ("guest wifi", "another zone", "trust boundary", "reachable from")),
    (RiskPattern.OVER_PRIVILEGE, ("full control", "over-privilege", "more access than", "least privilege")),
]


def match_risk_pattern(card: InsightCard) -> RiskPattern | None:
    """Best-effort tag of a risk card against the known pattern catalogue."""
    if card.type is not IssueType.RISK:
        return None
    text = " ".join((card.heading, card.description, render_rationale(card.rationale))).lower()
    for pattern, needles in _RISK_PATTERN_KEYWORDS:
        if any(n in text for n in needles):
            return pattern
    return None
