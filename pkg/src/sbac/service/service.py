"""Session operations: lifecycle, stage machine, clarify/edit/test flows,
call accounting, export, and replay.

Per-session mutation is serialized: a second concurrent mutating request
gets a busy error rather than interleaved partial state.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Callable

from .. import analyze as analyze_engine
from .. import clarify as clarify_engine
from .. import ripple as ripple_engine
from .. import vignette as vignette_engine
from ..gateway import (
    CallKind,
    ChatRequest,
    Fixture,
    ImagePart,
    ImagePurpose,
    RecordingTransport,
    ReplayTransport,
    SchemaError,
    TextPart,
    invoke,
    parse_structured,
    render_prompt,
)
from ..mark_model import (
    IdentificationResult,
    RawShape,
    assign_mark_numbers,
    consolidate_entities,
    validate_identification,
)
from ..policy_model import validate_policy
from .state import (
    GUIDANCE_DECK,
    FileSessionStore,
    IllegalTransition,
    SessionState,
    StorageError,
    canonical_json,
    new_session_id,
)

logger = logging.getLogger(__name__)

ENV_STORE_DIR = "SBAC_STORE_DIR"
ENV_VIGNETTE_K = "SBAC_VIGNETTE_K"

ARCHIVE_FORMAT_VERSION = 1


class SessionBusy(RuntimeError):
    pass


class StaleIdentification(RuntimeError):
    """Stage entry attempted without a fresh identification pass."""


class IdentificationInvalid(RuntimeError):
    def __init__(self, problems: list[str]) -> None:
        super().__init__("; ".join(problems))
        self.problems = problems


class ServiceError(RuntimeError):
    pass


@dataclass
class RippleSummary:
    edit_type: str
    phase1: dict[str, Any]
    phase2: dict[str, Any] | None
    warnings: list[str]

    def to_wire(self) -> dict[str, Any]:
        return {
            "editType": self.edit_type,
            "phase1": self.phase1,
            "phase2": self.phase2,
            "warnings": self.warnings,
        }


class SessionService:
    """Stateful shell over the engines; one instance serves many sessions."""

    def __init__(
        self,
        store: FileSessionStore | None = None,
        transport: Any = None,
        transport_factory: Callable[[str], Any] | None = None,
        record_fixtures: bool = False,
        fixture_dir: str | None = None,
        vignette_k: int | None = None,
    ) -> None:
        if store is None:
            store = FileSessionStore(os.environ.get(ENV_STORE_DIR, "./sbac-sessions"))
        self.store = store
        self._base_transport = transport
        self._transport_factory = transport_factory
        self._record = record_fixtures
        self._fixture_dir = fixture_dir
        self._transports: dict[str, Any] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        if vignette_k is None:
            vignette_k = int(os.environ.get(ENV_VIGNETTE_K, vignette_engine.DEFAULT_K))
        self.vignette_k = vignette_k

    # -- plumbing ---------------------------------------------------------

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    @contextmanager
    def mutate(self, session_id: str):
        """Exclusive load-edit-save window for one session.

        State is persisted even when the operation fails: engines never
        leave partial logical state behind on failure, but any model calls
        they made are real and must stay on the accounting log.
        """
        lock = self._lock_for(session_id)
        if not lock.acquire(blocking=False):
            raise SessionBusy(session_id)
        try:
            state = self.store.load(session_id)
        except BaseException:
            lock.release()
            raise
        try:
            yield state
        except BaseException:
            try:
                self.store.save(state)
            except StorageError:
                logger.exception("could not persist session %s after failure", session_id)
            raise
        else:
            self.store.save(state)
        finally:
            lock.release()

    def transport_for(self, session_id: str) -> Any:
        if session_id not in self._transports:
            base = (
                self._transport_factory(session_id)
                if self._transport_factory is not None
                else self._base_transport
            )
            if base is None:
                raise ServiceError("no transport configured")
            if self._record:
                subdir = None
                if self._fixture_dir:
                    subdir = os.path.join(self._fixture_dir, session_id)
                base = RecordingTransport(base, subdir)
            self._transports[session_id] = base
        return self._transports[session_id]

    def set_transport(self, session_id: str, transport: Any) -> None:
        self._transports[session_id] = transport

    # -- lifecycle --------------------------------------------------------

    def create_session(self, scenario_context: str, session_id: str | None = None) -> SessionState:
        state = SessionState(
            session_id=session_id or new_session_id(),
            scenario_context=scenario_context,
        )
        state.action_log.append(
            {"op": "create", "sessionId": state.session_id, "scenarioContext": scenario_context}
        )
        self.store.save(state)
        return state

    def get(self, session_id: str) -> SessionState:
        return self.store.load(session_id)

    def guidance_deck(self) -> list[dict[str, Any]]:
        return [{"order": c.order, "prompt": c.prompt} for c in GUIDANCE_DECK]

    def put_sketch(self, session_id: str, shapes_wire: list[dict[str, Any]]) -> SessionState:
        shapes = [RawShape.from_wire(s, path=f"shapes[{i}]") for i, s in enumerate(shapes_wire)]
        with self.mutate(session_id) as state:
            state.sketch_snapshot = shapes
            state.identification_fresh = False
            state.action_log.append({"op": "put_sketch", "shapes": shapes_wire})
            return state

    # -- identification and stage machine ---------------------------------

    def _identify_locked(self, state: SessionState, raw_png: bytes, numbered_png: bytes) -> IdentificationResult:
        if not state.sketch_snapshot:
            raise ServiceError("cannot identify an empty sketch")
        marks = assign_mark_numbers(state.sketch_snapshot)
        kind = CallKind.MARK_IDENTIFICATION if state.stage == "specify" else CallKind.REIDENTIFICATION
        mapping = {
            str(m.mark_number): {
                "shapeId": m.shape_id,
                "kind": shape.kind,
                "name": shape.text or "",
                "bbox": {"x": m.x, "y": m.y, "width": m.width, "height": m.height},
            }
            for m, shape in zip(marks, state.sketch_snapshot)
        }
        transport = self.transport_for(state.session_id)
        note: str | None = None
        problems: list[str] = []
        for _ in range(2):
            parts: list[TextPart | ImagePart] = [
                TextPart("Mark number to shape metadata:\n" + json.dumps(mapping, indent=2, sort_keys=True))
            ]
            if note:
                parts.append(TextPart(note))
            parts.append(ImagePart(raw_png, ImagePurpose.UNANNOTATED))
            parts.append(ImagePart(numbered_png, ImagePurpose.NUMBERED))
            request = ChatRequest(
                kind=kind,
                system_prompt=render_prompt(kind),
                user_parts=tuple(parts),
                schema_id="identify",
            )
            raw, _record = invoke(request, transport, state.call_log)
            try:
                identification = parse_structured(raw, "identify")
            except SchemaError as exc:
                problems = [str(exc)]
            else:
                violations = validate_identification(identification, marks)
                problems = [str(v) for v in violations]
                if not problems:
                    entities = consolidate_entities(identification, marks)
                    state.mark_map = marks
                    state.identification = identification
                    state.entities = entities
                    state.identification_fresh = True
                    self._strip_dangling_elements(state)
                    state.action_log.append({"op": "identify"})
                    return identification
            note = (
                "Your previous response was rejected. Fix these problems and respond again "
                "with the full JSON object: " + "; ".join(problems)
            )
        raise IdentificationInvalid(problems)

    def _strip_dangling_elements(self, state: SessionState) -> None:
        known = state.known_marks()
        for policy in state.policies:
            dangling = [
                ref for ref in policy.elements
                if not ref[1:-1].isdigit() or int(ref[1:-1]) not in known
            ]
            if dangling:
                policy.elements = [r for r in policy.elements if r not in dangling]
                state.audit_log.append(
                    f"{policy.policy_number}: dropped dangling mark refs {', '.join(dangling)}"
                )
        for entry in state.insight_ledger.entries():
            dangling = [
                ref for ref in entry.card.elements
                if not ref[1:-1].isdigit() or int(ref[1:-1]) not in known
            ]
            if dangling:
                state.audit_log.append(
                    f"{entry.card.id}: dangling mark refs {', '.join(dangling)} (kept, flagged)"
                )

    def identify(self, session_id: str, raw_png: bytes, numbered_png: bytes) -> IdentificationResult:
        with self.mutate(session_id) as state:
            return self._identify_locked(state, raw_png, numbered_png)

    def set_stage(self, session_id: str, target: str) -> SessionState:
        with self.mutate(session_id) as state:
            self._set_stage_locked(state, target)
            return state

    def _set_stage_locked(self, state: SessionState, target: str) -> None:
        if not state.can_enter(target):
            raise IllegalTransition(f"{state.stage} -> {target}")
        if not state.identification_fresh:
            raise StaleIdentification(
                f"entering {target} requires a fresh identification pass (POST /identify first)"
            )
        state.enter(target)
        state.identification_fresh = False  # consumed; next entry re-identifies
        state.action_log.append({"op": "stage", "target": target})
        if target == "test":
            self._run_test_locked(state)

    def enter_stage(
        self, session_id: str, target: str, numbered_png: bytes, raw_png: bytes
    ) -> SessionState:
        """Identify-then-advance convenience covering both split requests."""
        with self.mutate(session_id) as state:
            self._identify_locked(state, raw_png, numbered_png)
            self._set_stage_locked(state, target)
            return state

    # -- analyze stage -----------------------------------------------------

    def analyze(self, session_id: str, som_png: bytes) -> dict[str, Any]:
        with self.mutate(session_id) as state:
            if state.stage != "analyze":
                raise analyze_engine.StageError(f"analysis runs in the analyze stage, not {state.stage}")
            outcome = analyze_engine.run_analysis(state, self.transport_for(session_id), som_png)
            state.action_log.append({"op": "analyze"})
            return {
                "chat": outcome.chat,
                "generate": outcome.generate,
                "nextAction": outcome.next_action.value,
                "policies": [p.to_wire() for p in outcome.policies],
                "insights": [c.to_wire() for c in outcome.insights],
            }

    def insight_state(self, session_id: str, card_id: str, action: str) -> dict[str, Any]:
        with self.mutate(session_id) as state:
            entry = analyze_engine.set_insight_state(state.insight_ledger, card_id, action)
            state.action_log.append({"op": "insight_state", "cardId": card_id, "action": action})
            return entry.to_wire()

    def clarify(self, session_id: str, card_id: str, message: str) -> dict[str, Any]:
        with self.mutate(session_id) as state:
            entry = state.insight_ledger.get(card_id)
            if entry.lifecycle is analyze_engine.Lifecycle.DISMISSED:
                raise analyze_engine.UnknownInsight(card_id)
            card = entry.card
            transport = self.transport_for(session_id)
            classification = clarify_engine.classify_intent(
                card, message, state.stage, state.policies, transport, state.call_log
            )
            routed = clarify_engine.route(classification)
            view: dict[str, Any] = {
                "intent": classification.intent.value,
                "response": classification.response,
                "dismissed": False,
                "resolution": None,
                "sketchProposal": None,
            }
            if routed is clarify_engine.RoutedAction.DISMISS_AND_RESPOND:
                state.insight_ledger.dismiss(card_id, reason="dismissed by user (correct)")
                view["dismissed"] = True
            elif routed in (clarify_engine.RoutedAction.DEEP_FIX, clarify_engine.RoutedAction.DEEP_EXPLORE):
                resolution = clarify_engine.resolve_deep(
                    state, card, message, classification.intent, transport
                )
                view["resolution"] = {
                    "chat": resolution.chat,
                    "applied": resolution.applied,
                    "policies": [p.to_wire() for p in resolution.policies],
                    "insights": [c.to_wire() for c in resolution.insights],
                    "proposedActions": resolution.proposed_actions,
                }
                if resolution.applied:
                    proposal = clarify_engine.propose_sketch_sync(state, resolution, transport)
                    view["sketchProposal"] = proposal
            state.clarification_history.append(
                {
                    "cardId": card_id,
                    "userMessage": message,
                    "intent": classification.intent.value,
                    "response": (view["resolution"] or {}).get("chat", classification.response),
                }
            )
            state.action_log.append({"op": "clarify", "cardId": card_id, "message": message})
            return view

    # -- policy edits ------------------------------------------------------

    def patch_policy(self, session_id: str, policy_number: str, field_name: str, value: str) -> RippleSummary:
        with self.mutate(session_id) as state:
            policy = next((p for p in state.policies if p.policy_number == policy_number), None)
            if policy is None:
                raise KeyError(policy_number)
            old_value = getattr(policy, field_name, None)
            if old_value is None:
                raise ServiceError(f"not an editable field: {field_name}")
            edit = ripple_engine.describe_edit(policy_number, field_name, old_value, value)

            candidate = policy.copy()
            setattr(candidate, field_name, value)
            field_problems = [
                v for v in validate_policy(candidate, state.known_marks()) if v.field == field_name
            ]
            if field_problems:
                raise ServiceError("; ".join(str(v) for v in field_problems))

            warnings: list[str] = []
            if edit.edit_type.is_rename:
                existing_names = {p.subject for p in state.policies} | {p.resource for p in state.policies}
                existing_names |= {e.label for e in state.entities}
                if value in existing_names:
                    warnings.append(
                        f"rename collides with existing name '{value}'; left for user review"
                    )

            setattr(policy, field_name, value)  # the typed edit is policy truth
            transport = self.transport_for(session_id)
            phase1 = ripple_engine.propagate_policies(edit, state.policies, transport, state.call_log)
            state.policies = phase1.policies

            phase2_wire: dict[str, Any] | None = None
            phase2 = ripple_engine.propagate_insights(
                edit, phase1, state.insight_ledger.active_cards(), transport, state.call_log
            )
            if not phase2.skipped:
                state.insight_ledger.update_cards(phase2.insights)
            phase2_wire = {
                "hasChanges": phase2.has_changes,
                "summary": phase2.summary,
                "degraded": phase2.degraded,
                "skipped": phase2.skipped,
                "source": phase2.source,
            }
            state.status_notes.extend(warnings)
            state.action_log.append(
                {
                    "op": "patch_policy",
                    "policyNumber": policy_number,
                    "field": field_name,
                    "value": value,
                    "oldValue": old_value,
                }
            )
            return RippleSummary(
                edit_type=edit.edit_type.value,
                phase1={
                    "hasRipple": phase1.has_ripple,
                    "summary": phase1.summary,
                    "degraded": phase1.degraded,
                    "source": phase1.source,
                },
                phase2=phase2_wire,
                warnings=warnings,
            )

    # -- test stage ---------------------------------------------------------

    def _run_test_locked(self, state: SessionState) -> list[dict[str, Any]]:
        ctx = vignette_engine.TestRunContext(
            scenario_context=state.scenario_context,
            policies=list(state.policies),
            entity_labels=[e.label for e in state.entities],
            element_map_lines=analyze_engine.entity_context_lines(state.entities),
            active_insights=state.insight_ledger.active_cards(),
            known_marks=state.known_marks(),
            transport=self.transport_for(state.session_id),
            call_log=state.call_log,
            k=self.vignette_k,
        )
        result = vignette_engine.run_test_pipeline(ctx)
        renumbered = []
        for card in result.vignettes:
            state.vignette_counter += 1
            fresh = card.copy()
            fresh.id = f"vignette{state.vignette_counter}"
            renumbered.append(fresh)
        state.vignettes = renumbered
        state.insight_ledger.merge(renumbered)
        state.test_diagnostics = result.diagnostics
        return [c.to_wire() for c in renumbered]

    def run_test(self, session_id: str) -> list[dict[str, Any]]:
        with self.mutate(session_id) as state:
            if state.stage != "test":
                raise analyze_engine.StageError("vignette generation runs in the test stage")
            cards = self._run_test_locked(state)
            state.action_log.append({"op": "test"})
            return cards

    # -- proposals and shadows ----------------------------------------------

    def sketch_proposal(self, session_id: str, accept: bool) -> dict[str, Any]:
        with self.mutate(session_id) as state:
            proposal = state.pending_sketch_proposal
            if proposal is None:
                raise KeyError("no pending sketch proposal")
            applied = False
            if accept:
                events = proposal.get("events")
                if events is None:
                    # Analysis-stage directives carry no event batch yet;
                    # realize one now, then apply.
                    resolution = clarify_engine.DeepResolution(
                        chat="",
                        policies=[],
                        insights=[],
                        generate=proposal["directive"],
                        proposed_actions=proposal.get("proposedActions", []),
                        applied=True,
                    )
                    realized = clarify_engine.propose_sketch_sync(
                        state, resolution, self.transport_for(session_id)
                    )
                    events = realized["events"] if realized else None
                if events:
                    self._apply_sketch_events(state, events)
                    applied = True
            state.pending_sketch_proposal = None
            state.action_log.append({"op": "sketch_proposal", "accept": accept})
            return {"applied": applied, "accepted": accept}

    def _apply_sketch_events(self, state: SessionState, events: list[dict[str, Any]]) -> None:
        by_id = {s.shape_id: s for s in state.sketch_snapshot}
        counter = 0
        for event in events:
            etype = event.get("type")
            if etype == "think":
                continue
            if etype == "create":
                shape = event["shape"]
                counter += 1
                shape_id = shape.get("shapeId") or f"gen-{len(by_id) + counter}"
                created = RawShape(
                    shape_id=shape_id,
                    kind=shape.get("type", "rectangle"),
                    x=float(shape.get("x", shape.get("x1", 0))),
                    y=float(shape.get("y", shape.get("y1", 0))),
                    width=float(shape.get("width", 100)),
                    height=float(shape.get("height", 80)),
                    text=shape.get("text"),
                )
                state.sketch_snapshot.append(created)
                by_id[shape_id] = created
            elif etype == "edit":
                target = by_id.get(event.get("shapeId"))
                if target is None:
                    continue
                if "text" in event:
                    target.text = event["text"]
                if "width" in event:
                    target.width = float(event["width"])
                if "height" in event:
                    target.height = float(event["height"])
            elif etype == "move":
                target = by_id.get(event.get("shapeId"))
                if target is not None:
                    target.x = float(event.get("x", target.x))
                    target.y = float(event.get("y", target.y))
            elif etype == "delete":
                target = by_id.pop(event.get("shapeId"), None)
                if target is not None:
                    state.sketch_snapshot.remove(target)
        state.identification_fresh = False
        state.audit_log.append(f"applied sketch proposal with {len(events)} events")

    def apply_shadow(self, session_id: str, accept: bool) -> dict[str, Any]:
        from ..policy_model import insight_from_wire, policy_from_wire

        with self.mutate(session_id) as state:
            shadow = state.shadow_policies
            if shadow is None:
                raise KeyError("no shadow policy set")
            if accept:
                state.policies = [policy_from_wire(p, strict=False) for p in shadow["policies"]]
                state.insight_ledger.merge(
                    [insight_from_wire(c, strict=False) for c in shadow["insights"]]
                )
            state.shadow_policies = None
            state.action_log.append({"op": "shadow", "accept": accept})
            return {"applied": accept}

    # -- accounting, export, replay ------------------------------------------

    def call_budget(self, session_id: str) -> dict[str, Any]:
        state = self.store.load(session_id)
        return call_budget(state)

    def export_session(self, session_id: str) -> dict[str, Any]:
        state = self.store.load(session_id)
        transport = self._transports.get(session_id)
        fixtures: list[dict[str, Any]] = []
        if isinstance(transport, RecordingTransport):
            fixtures = [f.to_wire() for f in transport.fixtures]
        elif isinstance(transport, ReplayTransport):
            fixtures = [f.to_wire() for f in transport.fixtures]
        return {
            "formatVersion": ARCHIVE_FORMAT_VERSION,
            "state": state.to_wire(),
            "fixtures": fixtures,
        }

    def session_view(self, session_id: str) -> dict[str, Any]:
        state = self.store.load(session_id)
        view = {
            "sessionId": state.session_id,
            "stage": state.stage,
            "scenarioContext": state.scenario_context,
            "policies": [p.to_wire() for p in state.policies],
            "insights": [e.to_wire() for e in state.insight_ledger.entries()],
            "vignettes": [v.to_wire() for v in state.vignettes],
            "entities": [e.to_wire() for e in state.entities],
            "markMap": [m.to_wire() for m in state.mark_map],
            "pendingSketchProposal": state.pending_sketch_proposal,
            "shadowPolicies": state.shadow_policies,
            "suggestedNextAction": state.suggested_next_action,
            "statusNotes": state.status_notes,
            "callBudget": call_budget(state),
        }
        if state.stage == "specify":
            view["guidanceDeck"] = self.guidance_deck()
        return view


def call_budget(state: SessionState) -> dict[str, Any]:
    return {"count": len(state.call_log), "byKind": state.call_log.by_kind()}


def replay_archive(archive: dict[str, Any], store: FileSessionStore) -> SessionState:
    """Re-execute an exported session against its recorded fixtures.

    Deterministic by construction: responses, timestamps, and request
    digests come from the recording, so the rebuilt state is byte-identical
    to the archived one.
    """
    if archive.get("formatVersion") != ARCHIVE_FORMAT_VERSION:
        raise ServiceError(f"unsupported archive version {archive.get('formatVersion')!r}")
    fixtures = [Fixture.from_wire(f) for f in archive.get("fixtures", [])]
    actions = archive["state"]["actionLog"]
    transport = ReplayTransport(fixtures)
    service = SessionService(store=store, transport=transport)

    placeholder = b"replay-placeholder-png"
    session_id: str | None = None
    for action in actions:
        op = action["op"]
        if op == "create":
            session_id = action["sessionId"]
            service.create_session(action["scenarioContext"], session_id=session_id)
        elif session_id is None:
            raise ServiceError("archive actions precede session creation")
        elif op == "put_sketch":
            service.put_sketch(session_id, action["shapes"])
        elif op == "identify":
            service.identify(session_id, placeholder, placeholder)
        elif op == "stage":
            service.set_stage(session_id, action["target"])
        elif op == "analyze":
            service.analyze(session_id, placeholder)
        elif op == "clarify":
            service.clarify(session_id, action["cardId"], action["message"])
        elif op == "insight_state":
            service.insight_state(session_id, action["cardId"], action["action"])
        elif op == "patch_policy":
            service.patch_policy(session_id, action["policyNumber"], action["field"], action["value"])
        elif op == "test":
            service.run_test(session_id)
        elif op == "sketch_proposal":
            service.sketch_proposal(session_id, action["accept"])
        elif op == "shadow":
            service.apply_shadow(session_id, action["accept"])
        else:
            raise ServiceError(f"unknown archived op {op!r}")
    if session_id is None:
        raise ServiceError("archive contains no create action")
    return service.get(session_id)


def verify_replay(archive: dict[str, Any], store: FileSessionStore) -> tuple[bool, SessionState]:
    state = replay_archive(archive, store)
    expected = canonical_json(archive["state"])
    actual = canonical_json(state.to_wire())
    return expected == actual, state
