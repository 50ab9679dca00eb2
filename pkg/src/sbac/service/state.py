"""Session state, the stage machine, and file-backed persistence.

One JSON document per session. Serialization is canonical (sorted keys,
fixed indent) so a persistence round-trip is byte-identical, which the
export/replay machinery relies on.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..analyze import InsightLedger
from ..gateway import CallLog, CallRecord
from ..mark_model import (
    Entity,
    IdentificationResult,
    NumberedMark,
    RawShape,
    SemanticRole,
    identification_from_wire,
)
from ..policy_model import InsightCard, Policy, insight_from_wire, policy_from_wire

STAGES = ("specify", "analyze", "test")

# specify -> analyze -> test, with test -> analyze returns for refinement.
LEGAL_TRANSITIONS = {("specify", "analyze"), ("analyze", "test"), ("test", "analyze")}


class IllegalTransition(RuntimeError):
    pass


class StorageError(RuntimeError):
    pass


@dataclass(frozen=True)
class GuidanceCard:
    order: int
    prompt: str


# The four ABAC parameters, in the order the Specify stage walks them.
GUIDANCE_DECK: tuple[GuidanceCard, ...] = (
    GuidanceCard(1, "What resource(s) do you want to protect?"),
    GuidanceCard(2, "Who needs to interact with your resources?"),
    GuidanceCard(3, "What actions should each person be able to perform?"),
    GuidanceCard(4, "When or under what conditions should these actions be allowed?"),
)


def _entity_from_wire(doc: dict[str, Any]) -> Entity:
    return Entity(
        entity_id=doc["entityId"],
        role=SemanticRole(doc["role"]),
        label=doc["label"],
        member_marks=list(doc["memberMarks"]),
        related_entities=list(doc["relatedEntities"]),
    )


def _mark_from_wire(doc: dict[str, Any]) -> NumberedMark:
    bbox = doc["bbox"]
    return NumberedMark(
        mark_number=doc["markNumber"],
        shape_id=doc["shapeId"],
        x=bbox["x"],
        y=bbox["y"],
        width=bbox["width"],
        height=bbox["height"],
    )


@dataclass
class SessionState:
    """The persistent record of one authoring session."""

    session_id: str
    scenario_context: str
    stage: str = "specify"
    sketch_snapshot: list[RawShape] = field(default_factory=list)
    mark_map: list[NumberedMark] = field(default_factory=list)
    identification: IdentificationResult | None = None
    entities: list[Entity] = field(default_factory=list)
    policies: list[Policy] = field(default_factory=list)
    insight_ledger: InsightLedger = field(default_factory=InsightLedger)
    vignettes: list[InsightCard] = field(default_factory=list)
    shadow_policies: dict[str, Any] | None = None
    pending_sketch_proposal: dict[str, Any] | None = None
    clarification_history: list[dict[str, Any]] = field(default_factory=list)
    call_log: CallLog = field(default_factory=CallLog)
    identification_fresh: bool = False
    suggested_next_action: str = "continue"
    vignette_counter: int = 0
    status_notes: list[str] = field(default_factory=list)
    audit_log: list[str] = field(default_factory=list)
    action_log: list[dict[str, Any]] = field(default_factory=list)
    test_diagnostics: dict[str, Any] | None = None

    def can_enter(self, target: str) -> bool:
        return (self.stage, target) in LEGAL_TRANSITIONS

    def enter(self, target: str) -> None:
        if not self.can_enter(target):
            raise IllegalTransition(f"{self.stage} -> {target}")
        self.stage = target

    def known_marks(self) -> set[int]:
        return {m.mark_number for m in self.mark_map}

    def to_wire(self) -> dict[str, Any]:
        return {
            "sessionId": self.session_id,
            "scenarioContext": self.scenario_context,
            "stage": self.stage,
            "sketchSnapshot": [s.to_wire() for s in self.sketch_snapshot],
            "markMap": [m.to_wire() for m in self.mark_map],
            "identification": self.identification.to_wire() if self.identification else None,
            "entities": [e.to_wire() for e in self.entities],
            "policies": [p.to_wire() for p in self.policies],
            "insightLedger": self.insight_ledger.to_wire(),
            "vignettes": [v.to_wire() for v in self.vignettes],
            "shadowPolicies": self.shadow_policies,
            "pendingSketchProposal": self.pending_sketch_proposal,
            "clarificationHistory": list(self.clarification_history),
            "callLog": [r.to_wire() for r in self.call_log],
            "identificationFresh": self.identification_fresh,
            "suggestedNextAction": self.suggested_next_action,
            "vignetteCounter": self.vignette_counter,
            "statusNotes": list(self.status_notes),
            "auditLog": list(self.audit_log),
            "actionLog": list(self.action_log),
            "testDiagnostics": self.test_diagnostics,
        }

    @classmethod
    def from_wire(cls, doc: dict[str, Any]) -> SessionState:
        identification = (
            identification_from_wire(doc["identification"]) if doc.get("identification") else None
        )
        return cls(
            session_id=doc["sessionId"],
            scenario_context=doc["scenarioContext"],
            stage=doc["stage"],
            sketch_snapshot=[RawShape.from_wire(s) for s in doc.get("sketchSnapshot", [])],
            mark_map=[_mark_from_wire(m) for m in doc.get("markMap", [])],
            identification=identification,
            entities=[_entity_from_wire(e) for e in doc.get("entities", [])],
            policies=[policy_from_wire(p, strict=False) for p in doc.get("policies", [])],
            insight_ledger=InsightLedger.from_wire(doc.get("insightLedger", {})),
            vignettes=[insight_from_wire(v, strict=False) for v in doc.get("vignettes", [])],
            shadow_policies=doc.get("shadowPolicies"),
            pending_sketch_proposal=doc.get("pendingSketchProposal"),
            clarification_history=list(doc.get("clarificationHistory", [])),
            call_log=CallLog([CallRecord.from_wire(r) for r in doc.get("callLog", [])]),
            identification_fresh=doc.get("identificationFresh", False),
            suggested_next_action=doc.get("suggestedNextAction", "continue"),
            vignette_counter=doc.get("vignetteCounter", 0),
            status_notes=list(doc.get("statusNotes", [])),
            audit_log=list(doc.get("auditLog", [])),
            action_log=list(doc.get("actionLog", [])),
            test_diagnostics=doc.get("testDiagnostics"),
        )


def canonical_json(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def new_session_id() -> str:
    return uuid.uuid4().hex


class FileSessionStore:
    """One canonical JSON document per session in a flat directory."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageError(f"cannot create store directory {self.directory}: {exc}") from exc

    def _path(self, session_id: str) -> Path:
        if not session_id.replace("-", "").isalnum():
            raise StorageError(f"invalid session id {session_id!r}")
        return self.directory / f"{session_id}.json"

    def save(self, state: SessionState) -> None:
        try:
            self._path(state.session_id).write_text(
                canonical_json(state.to_wire()), encoding="utf-8"
            )
        except OSError as exc:
            raise StorageError(f"cannot persist session {state.session_id}: {exc}") from exc

    def load(self, session_id: str) -> SessionState:
        path = self._path(session_id)
        if not path.exists():
            raise KeyError(session_id)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise StorageError(f"cannot read session {session_id}: {exc}") from exc
        return SessionState.from_wire(doc)

    def exists(self, session_id: str) -> bool:
        return self._path(session_id).exists()

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.directory.glob("*.json"))
