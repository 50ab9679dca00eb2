"""Mark numbering, identification validation, and entity consolidation.

Raw canvas shapes get dense 1..n mark numbers in z-order. The
identification model returns per-mark roles, relationships, and multi-mark
groups; after validation, groups and ungrouped marks are consolidated into
the semantic entities every later stage reasons over.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .policy_model import Violation, WireFormatError

MARK_REF_RE = re.compile(r"\[([0-9]+)\]")


class SemanticRole(Enum):
    SUBJECT = "subject"
    ACTION = "action"
    RESOURCE = "resource"
    CONTEXT = "context"


class RelationshipType(Enum):
    ARROW = "arrow"
    CONTAINMENT = "containment"
    PROXIMITY = "proximity"


class DuplicateShapeId(ValueError):
    pass


class InvalidIdentification(ValueError):
    """Raised when consolidation is attempted on an invalid identification."""

    def __init__(self, violations: list[Violation]) -> None:
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = violations


@dataclass
class RawShape:
    """One canvas shape as serialized by the drawing client."""

    shape_id: str
    kind: str
    x: float
    y: float
    width: float
    height: float
    text: str | None = None

    def to_wire(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "shapeId": self.shape_id,
            "kind": self.kind,
            "bbox": {"x": self.x, "y": self.y, "width": self.width, "height": self.height},
        }
        if self.text is not None:
            doc["text"] = self.text
        return doc

    @classmethod
    def from_wire(cls, doc: dict[str, Any], path: str = "shape") -> RawShape:
        if not isinstance(doc, dict):
            raise WireFormatError(path, "expected an object")
        try:
            bbox = doc["bbox"]
            shape = cls(
                shape_id=doc["shapeId"],
                kind=doc["kind"],
                x=float(bbox["x"]),
                y=float(bbox["y"]),
                width=float(bbox["width"]),
                height=float(bbox["height"]),
                text=doc.get("text"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise WireFormatError(path, f"bad shape document: {exc}") from None
        if shape.width < 0 or shape.height < 0:
            raise WireFormatError(f"{path}.bbox", "negative width or height")
        return shape


@dataclass(frozen=True)
class NumberedMark:
    mark_number: int
    shape_id: str
    x: float
    y: float
    width: float
    height: float

    def to_wire(self) -> dict[str, Any]:
        return {
            "markNumber": self.mark_number,
            "shapeId": self.shape_id,
            "bbox": {"x": self.x, "y": self.y, "width": self.width, "height": self.height},
        }


@dataclass
class EnrichedMark:
    mark_number: int
    semantic_role: SemanticRole
    semantic_description: str
    related_marks: list[int] = field(default_factory=list)


@dataclass
class MarkGroup:
    representative_mark: int
    member_marks: list[int]
    group_label: str
    group_role: SemanticRole


@dataclass
class Relationship:
    from_mark: int
    to_mark: int
    type: RelationshipType
    label: str | None = None


@dataclass
class IdentificationResult:
    enriched_marks: list[EnrichedMark]
    relationships: list[Relationship] = field(default_factory=list)
    groups: list[MarkGroup] = field(default_factory=list)

    def to_wire(self) -> dict[str, Any]:
        return {
            "enrichedMarks": [
                {
                    "markNumber": m.mark_number,
                    "semanticRole": m.semantic_role.value,
                    "semanticDescription": m.semantic_description,
                    "relatedMarks": list(m.related_marks),
                }
                for m in self.enriched_marks
            ],
            "relationships": [
                {
                    "fromMark": r.from_mark,
                    "toMark": r.to_mark,
                    **({"label": r.label} if r.label is not None else {}),
                    "type": r.type.value,
                }
                for r in self.relationships
            ],
            "groups": [
                {
                    "representativeMark": g.representative_mark,
                    "memberMarks": list(g.member_marks),
                    "groupLabel": g.group_label,
                    "groupRole": g.group_role.value,
                }
                for g in self.groups
            ],
        }


@dataclass
class Entity:
    """A consolidated semantic entity: one group or one ungrouped mark."""

    entity_id: int
    role: SemanticRole
    label: str
    member_marks: list[int]
    related_entities: list[int] = field(default_factory=list)

    def to_wire(self) -> dict[str, Any]:
        return {
            "entityId": self.entity_id,
            "role": self.role.value,
            "label": self.label,
            "memberMarks": list(self.member_marks),
            "relatedEntities": list(self.related_entities),
        }


def assign_mark_numbers(shapes: list[RawShape]) -> list[NumberedMark]:
    """Number shapes densely 1..n in the given (z-order) sequence."""
    seen: set[str] = set()
    marks: list[NumberedMark] = []
    for i, shape in enumerate(shapes, start=1):
        if shape.shape_id in seen:
            raise DuplicateShapeId(shape.shape_id)
        seen.add(shape.shape_id)
        marks.append(
            NumberedMark(
                mark_number=i,
                shape_id=shape.shape_id,
                x=shape.x,
                y=shape.y,
                width=shape.width,
                height=shape.height,
            )
        )
    return marks


def validate_identification(r: IdentificationResult, marks: list[NumberedMark]) -> list[Violation]:
    """Report every structural problem in an identification result.

    Flags unknown mark numbers, representatives that are not the lowest
    member, overlapping groups, and self-relationships. Role validity is
    enforced by the enums at parse time but re-checked here for results
    built programmatically.
    """
    known = {m.mark_number for m in marks}
    report: list[Violation] = []

    enriched_numbers: set[int] = set()
    for i, em in enumerate(r.enriched_marks):
        path = f"enrichedMarks[{i}]"
        if em.mark_number not in known:
            report.append(Violation(path, f"unknown mark number {em.mark_number}"))
        if em.mark_number in enriched_numbers:
            report.append(Violation(path, f"duplicate mark number {em.mark_number}"))
        enriched_numbers.add(em.mark_number)
        if not isinstance(em.semantic_role, SemanticRole):
            report.append(Violation(path, f"invalid role {em.semantic_role!r}"))
        for rm in em.related_marks:
            if rm not in known:
                report.append(Violation(f"{path}.relatedMarks", f"unknown mark number {rm}"))

    for i, rel in enumerate(r.relationships):
        path = f"relationships[{i}]"
        if rel.from_mark == rel.to_mark:
            report.append(Violation(path, f"self-relationship on mark {rel.from_mark}"))
        for end in (rel.from_mark, rel.to_mark):
            if end not in known:
                report.append(Violation(path, f"unknown mark number {end}"))

    claimed: dict[int, int] = {}
    for i, g in enumerate(r.groups):
        path = f"groups[{i}]"
        if not g.member_marks:
            report.append(Violation(path, "empty group"))
            continue
        for mm in g.member_marks:
            if mm not in known:
                report.append(Violation(path, f"unknown mark number {mm}"))
            if mm in claimed:
                report.append(Violation(path, f"overlapping groups: mark {mm} also in groups[{claimed[mm]}]"))
            else:
                claimed[mm] = i
            if mm not in enriched_numbers:
                report.append(Violation(path, f"group member {mm} missing from enrichedMarks"))
        if g.representative_mark != min(g.member_marks):
            report.append(Violation(path, "representative not lowest member"))
        elif g.representative_mark not in g.member_marks:
            report.append(Violation(path, "representative outside member list"))
    return report


def consolidate_entities(r: IdentificationResult, marks: list[NumberedMark]) -> list[Entity]:
    """Collapse groups into entities and carry ungrouped marks through.

    Each group yields one entity (id = representative, role/label from the
    group, which wins over member-level roles); each ungrouped mark yields
    one entity of its own. Entity adjacency merges relatedMarks and
    relationships, mapped through group membership, deduplicated, and is
    direction-insensitive; the directed relationship list stays available
    on the identification itself.
    """
    violations = validate_identification(r, marks)
    if violations:
        raise InvalidIdentification(violations)

    owner: dict[int, int] = {}
    entities: dict[int, Entity] = {}
    for g in r.groups:
        for mm in g.member_marks:
            owner[mm] = g.representative_mark
        entities[g.representative_mark] = Entity(
            entity_id=g.representative_mark,
            role=g.group_role,
            label=g.group_label,
            member_marks=sorted(g.member_marks),
        )
    for em in r.enriched_marks:
        if em.mark_number not in owner:
            owner[em.mark_number] = em.mark_number
            entities[em.mark_number] = Entity(
                entity_id=em.mark_number,
                role=em.semantic_role,
                label=em.semantic_description,
                member_marks=[em.mark_number],
            )

    adjacency: dict[int, set[int]] = {eid: set() for eid in entities}
    def connect(a: int, b: int) -> None:
        ea, eb = owner.get(a), owner.get(b)
        if ea is None or eb is None or ea == eb:
            return
        adjacency[ea].add(eb)
        adjacency[eb].add(ea)

    for em in r.enriched_marks:
        for rm in em.related_marks:
            connect(em.mark_number, rm)
    for rel in r.relationships:
        connect(rel.from_mark, rel.to_mark)

    out = []
    for eid in sorted(entities):
        entity = entities[eid]
        entity.related_entities = sorted(adjacency[eid])
        out.append(entity)
    return out


@dataclass
class ResolvedElements:
    """Element-reference lookup result: entities found plus refs that failed."""

    entities: list[Entity]
    unknown_refs: list[str]


class UnknownMarkReference(ValueError):
    def __init__(self, refs: list[str]) -> None:
        super().__init__(", ".join(refs))
        self.refs = refs


def resolve_element_refs(refs: list[str], entities: list[Entity]) -> ResolvedElements:
    """Map "[N]" references to the entities containing mark N.

    Duplicate hits are deduplicated in first-seen order; unresolvable refs
    are collected rather than dropped so callers can surface them.
    """
    by_mark: dict[int, Entity] = {}
    for entity in entities:
        for mm in entity.member_marks:
            by_mark[mm] = entity

    found: list[Entity] = []
    seen_ids: set[int] = set()
    unknown: list[str] = []
    for ref in refs:
        m = MARK_REF_RE.fullmatch(ref)
        mark = int(m.group(1)) if m else None
        entity = by_mark.get(mark) if mark is not None else None
        if entity is None:
            unknown.append(ref)
        elif entity.entity_id not in seen_ids:
            seen_ids.add(entity.entity_id)
            found.append(entity)
    return ResolvedElements(entities=found, unknown_refs=unknown)


def identification_from_wire(doc: dict[str, Any], path: str = "identification") -> IdentificationResult:
    """Decode the identification response document (strict)."""
    if not isinstance(doc, dict):
        raise WireFormatError(path, "expected an object")
    allowed = {"enrichedMarks", "relationships", "groups"}
    for key in doc:
        if key not in allowed:
            raise WireFormatError(f"{path}.{key}", "unknown field")
    if "enrichedMarks" not in doc or not isinstance(doc["enrichedMarks"], list):
        raise WireFormatError(f"{path}.enrichedMarks", "missing or not a list")

    def as_role(raw: Any, p: str) -> SemanticRole:
        try:
            return SemanticRole(raw)
        except ValueError:
            raise WireFormatError(p, f"unknown role {raw!r}") from None

    def as_int(raw: Any, p: str) -> int:
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise WireFormatError(p, f"expected an integer, got {raw!r}")
        return raw

    enriched = []
    for i, em in enumerate(doc["enrichedMarks"]):
        p = f"{path}.enrichedMarks[{i}]"
        if not isinstance(em, dict):
            raise WireFormatError(p, "expected an object")
        for key in em:
            if key not in {"markNumber", "semanticRole", "semanticDescription", "relatedMarks"}:
                raise WireFormatError(f"{p}.{key}", "unknown field")
        related = em.get("relatedMarks", [])
        if not isinstance(related, list):
            raise WireFormatError(f"{p}.relatedMarks", "expected a list")
        enriched.append(
            EnrichedMark(
                mark_number=as_int(em.get("markNumber"), f"{p}.markNumber"),
                semantic_role=as_role(em.get("semanticRole"), f"{p}.semanticRole"),
                semantic_description=str(em.get("semanticDescription", "")),
                related_marks=[as_int(x, f"{p}.relatedMarks[{j}]") for j, x in enumerate(related)],
            )
        )

    relationships = []
    for i, rel in enumerate(doc.get("relationships", [])):
        p = f"{path}.relationships[{i}]"
        if not isinstance(rel, dict):
            raise WireFormatError(p, "expected an object")
        for key in rel:
            if key not in {"fromMark", "toMark", "label", "type"}:
                raise WireFormatError(f"{p}.{key}", "unknown field")
        try:
            rel_type = RelationshipType(rel.get("type"))
        except ValueError:
            raise WireFormatError(f"{p}.type", f"unknown relationship type {rel.get('type')!r}") from None
        relationships.append(
            Relationship(
                from_mark=as_int(rel.get("fromMark"), f"{p}.fromMark"),
                to_mark=as_int(rel.get("toMark"), f"{p}.toMark"),
                label=rel.get("label"),
                type=rel_type,
            )
        )

    groups = []
    for i, g in enumerate(doc.get("groups", [])):
        p = f"{path}.groups[{i}]"
        if not isinstance(g, dict):
            raise WireFormatError(p, "expected an object")
        for key in g:
            if key not in {"representativeMark", "memberMarks", "groupLabel", "groupRole"}:
                raise WireFormatError(f"{p}.{key}", "unknown field")
        members = g.get("memberMarks")
        if not isinstance(members, list):
            raise WireFormatError(f"{p}.memberMarks", "expected a list")
        groups.append(
            MarkGroup(
                representative_mark=as_int(g.get("representativeMark"), f"{p}.representativeMark"),
                member_marks=[as_int(x, f"{p}.memberMarks[{j}]") for j, x in enumerate(members)],
                group_label=str(g.get("groupLabel", "")),
                group_role=as_role(g.get("groupRole"), f"{p}.groupRole"),
            )
        )

    return IdentificationResult(enriched_marks=enriched, relationships=relationships, groups=groups)
