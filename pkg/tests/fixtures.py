"""Golden wire fixtures: one office-camera session used across the suite.

The scripted transport responses here drive the full workflow. Responses
that must deterministically depend on earlier state (ripple propagation,
story realization) are built by functions so they stay consistent with
the session they are replayed into.
"""

from __future__ import annotations

import copy
import json
from typing import Any

from sbac.policy_model import policy_from_wire
from sbac.ripple import describe_edit, oracle_insights, reference_oracle
from sbac.vignette import enumerate_candidates, schemas_from_wire, select_greedy

PNG = b"\x89PNG\r\n\x1a\n" + b"fixture"

SCENARIO = (
    "Office entrance: Alice works the front desk, an Office Manager oversees "
    "the space, and a Front Camera watches the entrance."
)

SHAPES_WIRE: list[dict[str, Any]] = [
    {"shapeId": "s-alice", "kind": "person", "bbox": {"x": 100, "y": 200, "width": 100, "height": 80}, "text": "Alice"},
    {"shapeId": "s-arrow", "kind": "arrow", "bbox": {"x": 200, "y": 230, "width": 300, "height": 10}, "text": "view"},
    {"shapeId": "s-cam", "kind": "camera", "bbox": {"x": 520, "y": 200, "width": 100, "height": 80}, "text": "Front Camera"},
    {"shapeId": "s-mgr-icon", "kind": "person", "bbox": {"x": 100, "y": 420, "width": 100, "height": 80}},
    {"shapeId": "s-mgr-label", "kind": "text", "bbox": {"x": 100, "y": 510, "width": 120, "height": 30}, "text": "Office Manager"},
    {"shapeId": "s-mgr-box", "kind": "rectangle", "bbox": {"x": 90, "y": 410, "width": 140, "height": 140}},
]

IDENTIFY_RESPONSE: dict[str, Any] = {
    "enrichedMarks": [
        {"markNumber": 1, "semanticRole": "subject", "semanticDescription": "Alice", "relatedMarks": [2, 3]},
        {"markNumber": 2, "semanticRole": "action", "semanticDescription": "view", "relatedMarks": [1, 3]},
        {"markNumber": 3, "semanticRole": "resource", "semanticDescription": "Front Camera", "relatedMarks": [2]},
        {"markNumber": 4, "semanticRole": "subject", "semanticDescription": "Office Manager", "relatedMarks": [3]},
        {"markNumber": 5, "semanticRole": "subject", "semanticDescription": "Office Manager label", "relatedMarks": [4]},
        {"markNumber": 6, "semanticRole": "subject", "semanticDescription": "grouping box", "relatedMarks": [4]},
    ],
    "relationships": [
        {"fromMark": 1, "toMark": 3, "label": "view", "type": "arrow"},
        {"fromMark": 4, "toMark": 3, "label": "manage", "type": "proximity"},
    ],
    "groups": [
        {"representativeMark": 4, "memberMarks": [4, 5, 6], "groupLabel": "Office Manager", "groupRole": "subject"},
    ],
}

POLICY1: dict[str, Any] = {
    "policyNumber": "policy1",
    "description": "Alice is allowed to view Front Camera during business hours",
    "explanation": "Alice is connected to Front Camera by a directed arrow labelled view, indicating view access during business hours.",
    "subject": "Alice",
    "resource": "Front Camera",
    "action": "view",
    "context": "during business hours",
    "elements": ["[1]", "[2]", "[3]"],
}

POLICY2: dict[str, Any] = {
    "policyNumber": "policy2",
    "description": "Office Manager can manage Front Camera",
    "explanation": "The Office Manager group sits beside Front Camera with a manage connection, indicating management access.",
    "subject": "Office Manager",
    "resource": "Front Camera",
    "action": "manage",
    "context": "None",
    "elements": ["[4]", "[3]"],
}

POLICY3: dict[str, Any] = {
    "policyNumber": "policy3",
    "description": "Visitors cannot view Front Camera",
    "explanation": "A crossed-out annotation near Front Camera denies visitor viewing.",
    "subject": "Visitors",
    "resource": "Front Camera",
    "action": "view",
    "context": "None",
    "elements": ["[3]"],
}

RISK1: dict[str, Any] = {
    "id": "risk1",
    "type": "risk",
    "heading": "Office Manager fully controls Front Camera",
    "description": "Office Manager can manage Front Camera without any conditions or oversight.",
    "elements": ["[4]", "[3]"],
    "rationale": (
        "What's happening: Office Manager -> manage -> Front Camera"
        " | What's expected: Management access should be scoped and conditional"
        " | Why it matters: Unconditional manage access violates least privilege"
    ),
}

AMBIGUITY1: dict[str, Any] = {
    "id": "ambiguity1",
    "type": "ambiguity",
    "heading": "What counts as business hours?",
    "description": "Imagine it's 8:55 AM on a holiday -- should Alice already be able to view the Front Camera?",
    "elements": ["[1]", "[3]"],
    "rationale": (
        "What's happening: Alice -> view -> Front Camera (during business hours) -- the time window is underspecified"
        " | What's expected: Every policy should define Subject, Action, Resource, and Context"
        " | Why it matters: Without a precise time window, the policy cannot be fully evaluated"
    ),
}

ANALYZE_RESPONSE: dict[str, Any] = {
    "chat": "I extracted three policies and flagged a risk and an ambiguity.",
    "generate": None,
    "policies": [POLICY1, POLICY2, POLICY3],
    "insights": [RISK1, AMBIGUITY1],
    "nextAction": "continue",
}

INTENT_FIX_RESPONSE: dict[str, Any] = {
    "intent": "fix",
    "response": "Got it -- updating the time window now.",
    "dismissInsight": False,
}

POLICY1_FIXED = {
    **POLICY1,
    "description": "Alice is allowed to view Front Camera on weekdays 9am-5pm",
    "explanation": "Alice is connected to Front Camera by a directed arrow labelled view; the user clarified the window as weekdays 9am-5pm.",
    "context": "weekdays 9am-5pm",
}

DEEP_RESOLUTION_RESPONSE: dict[str, Any] = {
    "chat": "I updated Alice's viewing window to weekdays 9am-5pm and resolved the ambiguity.",
    "policies": [POLICY1_FIXED, POLICY2, POLICY3],
    "insights": [RISK1],
    "generate": "Add a text label 'Weekdays 9am-5pm' near the view arrow between Alice and Front Camera",
    "proposedActions": ["Add time label near view arrow"],
}

SKETCH_SYNC_RESPONSE: dict[str, Any] = {
    "long_description_of_strategy": "Add a text shape under the view arrow carrying the clarified time window.",
    "events": [
        {
            "type": "create",
            "shape": {
                "type": "text",
                "shapeId": "condition-time-window",
                "note": "Condition label for Alice's view permission",
                "x": 300,
                "y": 280,
                "color": "grey",
                "text": "Weekdays 9am-5pm",
            },
            "intent": "Add time condition label near the view arrow",
        }
    ],
}

RENAME_FIELD = "resource"
RENAME_OLD = "Front Camera"
RENAME_NEW = "Entrance Camera"

DECOMPOSE_RESPONSE: dict[str, Any] = {
    "schemas": [
        {
            "policyNumber": "policy1",
            "explanation": "Alice's entrance-camera viewing permission",
            "fixedFactors": {"system": "Office entrance monitoring"},
            "variableFactors": [
                {
                    "name": "operation",
                    "dimension": "action",
                    "policyValue": {"value": "view", "label": "View the live feed", "isBaseline": True, "boundaryType": "baseline"},
                    "alternatives": [
                        {"value": "download_footage", "label": "Download recorded footage", "isBaseline": False, "boundaryType": "just_outside"},
                        {"value": "configure_camera", "label": "Change camera settings", "isBaseline": False, "boundaryType": "clearly_outside"},
                    ],
                    "rationale": "Does 'view' quietly cover exporting or configuring?",
                    "interactionHints": ["timing"],
                },
                {
                    "name": "timing",
                    "dimension": "context",
                    "policyValue": {"value": "business_hours", "label": "During staffed business hours", "isBaseline": True, "boundaryType": "baseline"},
                    "alternatives": [
                        {"value": "just_after_close", "label": "At 5:05 PM, minutes after closing", "isBaseline": False, "boundaryType": "just_outside"},
                        {"value": "middle_of_night", "label": "At 2 AM with the office empty", "isBaseline": False, "boundaryType": "clearly_outside"},
                        {"value": "fire_alarm", "label": "During a fire alarm after hours", "isBaseline": False, "boundaryType": "ambiguous"},
                    ],
                    "rationale": "Edges of the staffed-hours window",
                },
            ],
            "policyAnalysis": {
                "identifiedAmbiguities": ["Does 'business hours' include holidays?", "timing of handoff at closing"],
                "identifiedRisks": [],
                "underSpecifiedConditions": ["timing outside staffed hours"],
                "conflictsWithPolicies": [],
            },
        },
        {
            "policyNumber": "policy2",
            "explanation": "Office Manager's management permission",
            "fixedFactors": {"system": "Office entrance monitoring"},
            "variableFactors": [
                {
                    "name": "operation",
                    "dimension": "action",
                    "policyValue": {"value": "manage", "label": "Manage the camera", "isBaseline": True, "boundaryType": "baseline"},
                    "alternatives": [
                        {"value": "reboot", "label": "Reboot the camera", "isBaseline": False, "boundaryType": "just_inside"},
                        {"value": "delete_recordings", "label": "Delete stored recordings", "isBaseline": False, "boundaryType": "just_outside"},
                    ],
                    "rationale": "What operations does 'manage' include?",
                },
                {
                    "name": "timing",
                    "dimension": "context",
                    "policyValue": {"value": "anytime", "label": "At any time", "isBaseline": True, "boundaryType": "baseline"},
                    "alternatives": [
                        {"value": "after_hours_unsupervised", "label": "Alone after hours", "isBaseline": False, "boundaryType": "just_outside"},
                        {"value": "during_guest_event", "label": "During a guest event", "isBaseline": False, "boundaryType": "ambiguous"},
                    ],
                    "rationale": "Unconditional access is being probed",
                },
            ],
            "policyAnalysis": {
                "identifiedAmbiguities": ["what operations 'manage' includes"],
                "identifiedRisks": ["Unconditional manage access"],
                "underSpecifiedConditions": [],
                "conflictsWithPolicies": ["policy1"],
            },
        },
    ]
}

VIGNETTE_K = 6


def expected_selection():
    schemas = schemas_from_wire(DECOMPOSE_RESPONSE["schemas"])
    candidates = enumerate_candidates(schemas)
    return select_greedy(candidates, VIGNETTE_K, schemas)


def build_realization_response(selected=None) -> dict[str, Any]:
    """Vignette cards faithfully translating the selected candidates."""
    if selected is None:
        selected = expected_selection()
    vignettes = []
    for i, case in enumerate(selected, start=1):
        varied = ", ".join(case.varied_factors) or "the baseline itself"
        elements = ["[1]", "[2]", "[3]"] if case.source_policy == "policy1" else ["[4]", "[3]"]
        vignettes.append(
            {
                "id": f"vignette{i}",
                "type": "vignette",
                "heading": f"Boundary probe {i} on {case.source_policy}",
                "description": f"A concrete scenario varying {varied} to probe {case.source_policy}.",
                "expectedOutcome": case.expected_outcome.value,
                "relevantPolicies": [case.source_policy],
                "elements": elements,
                "rationale": (
                    f"What's happening: scenario for {case.case_id}"
                    " | What's expected: the policy's stated boundary holds"
                    f" | What this tests: {case.diagnostics}"
                ),
            }
        )
    return {"vignettes": vignettes}


def policies_after_fix() -> list[dict[str, Any]]:
    return [copy.deepcopy(POLICY1_FIXED), copy.deepcopy(POLICY2), copy.deepcopy(POLICY3)]


def build_rename_propagation_responses() -> tuple[str, str]:
    """Scripted phase-1/phase-2 rename responses equal to the oracle output.

    Mirrors the session state at patch time on the max path: the fix
    already replaced policy1 and resolved ambiguity1, and the service has
    applied the field edit itself before phase 1 runs.
    """
    edit = describe_edit("policy1", RENAME_FIELD, RENAME_OLD, RENAME_NEW)
    policies = [policy_from_wire(p) for p in policies_after_fix()]
    for p in policies:
        if p.policy_number == "policy1":
            p.resource = RENAME_NEW
    phase1 = reference_oracle(edit, policies)
    phase1_doc = {
        "hasRipple": phase1.has_ripple,
        "summary": phase1.summary,
        "policies": [p.to_wire() for p in phase1.policies],
    }

    from sbac.policy_model import insight_from_wire

    cards = [insight_from_wire(copy.deepcopy(RISK1))]
    phase2 = oracle_insights(edit, cards)
    phase2_doc = {
        "hasChanges": phase2.has_changes,
        "summary": phase2.summary,
        "insights": [c.to_wire() for c in phase2.insights],
    }
    return json.dumps(phase1_doc), json.dumps(phase2_doc)


def j(doc: Any) -> str:
    return json.dumps(doc)


def min_path_script() -> list[tuple[str, str]]:
    """Scripted (kind, response) pairs for the 5-call minimum session."""
    return [
        ("mark_identification", j(IDENTIFY_RESPONSE)),
        ("ci_analysis", j(ANALYZE_RESPONSE)),
        ("reidentification", j(IDENTIFY_RESPONSE)),
        ("factor_decomposition", j(DECOMPOSE_RESPONSE)),
        ("story_realization", j(build_realization_response())),
    ]


def max_path_script() -> list[tuple[str, str]]:
    """Scripted pairs for the 10-call maximum session (fix + sync + edit)."""
    phase1, phase2 = build_rename_propagation_responses()
    return [
        ("mark_identification", j(IDENTIFY_RESPONSE)),
        ("ci_analysis", j(ANALYZE_RESPONSE)),
        ("intent_classification", j(INTENT_FIX_RESPONSE)),
        ("deep_resolution", j(DEEP_RESOLUTION_RESPONSE)),
        ("sketch_sync", j(SKETCH_SYNC_RESPONSE)),
        ("policy_propagation", phase1),
        ("insight_propagation", phase2),
        ("reidentification", j(IDENTIFY_RESPONSE)),
        ("factor_decomposition", j(DECOMPOSE_RESPONSE)),
        ("story_realization", j(build_realization_response())),
    ]
