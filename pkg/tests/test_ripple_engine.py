from __future__ import annotations

import json

import pytest

from sbac.gateway import CallLog, ScriptedTransport, TransportError
from sbac.policy_model import insight_from_wire, policy_from_wire
from sbac.ripple import (
    EditType,
    NoOpEdit,
    classify_edit,
    describe_edit,
    oracle_insights,
    propagate_insights,
    propagate_policies,
    reference_oracle,
    RippleResult,
)

import fixtures as fx


def five_policy_fixture():
    """Five policies, two of which mention the Lobby Camera by name."""
    docs = [
        {
            "policyNumber": "policy1",
            "description": "Office Manager can view Lobby Camera at any time",
            "explanation": "An arrow connects Office Manager to Lobby Camera labelled view.",
            "subject": "Office Manager",
            "resource": "Lobby Camera",
            "action": "view",
            "context": "None",
            "elements": ["[1]", "[2]"],
        },
        {
            "policyNumber": "policy2",
            "description": "Security Staff can review Lobby Camera recordings nightly",
            "explanation": "Security Staff box sits next to the Lobby Camera icon.",
            "subject": "Security Staff",
            "resource": "Lobby Camera",
            "action": "review recordings",
            "context": "nightly",
            "elements": ["[3]", "[2]"],
        },
        {
            "policyNumber": "policy3",
            "description": "Visitors cannot open the Supply Closet",
            "explanation": "A crossed-out arrow blocks Visitors from the Supply Closet.",
            "subject": "Visitors",
            "resource": "Supply Closet",
            "action": "open",
            "context": "None",
            "elements": ["[4]", "[5]"],
        },
        {
            "policyNumber": "policy4",
            "description": "Alice can adjust the Thermostat during work hours",
            "explanation": "Alice links to the Thermostat with an adjust label.",
            "subject": "Alice",
            "resource": "Thermostat",
            "action": "adjust",
            "context": "during work hours",
            "elements": ["[6]", "[7]"],
        },
        {
            "policyNumber": "policy5",
            "description": "Office Manager can configure the Card Reader",
            "explanation": "Office Manager group is drawn around the Card Reader.",
            "subject": "Office Manager",
            "resource": "Card Reader",
            "action": "configure",
            "context": "None",
            "elements": ["[1]", "[8]"],
        },
    ]
    return [policy_from_wire(d) for d in docs]


def rename_edit(old="Lobby Camera", new="Front Door Camera", policy="policy1", field="resource"):
    return describe_edit(policy, field, old, new)


class TestClassifyEdit:
    @pytest.mark.parametrize(
        "field,expected",
        [
            ("subject", EditType.RENAME_SUBJECT),
            ("resource", EditType.RENAME_RESOURCE),
            ("action", EditType.ACTION_CHANGE),
            ("context", EditType.CONTEXT_CHANGE),
            ("description", EditType.TEXT_ONLY),
            ("explanation", EditType.TEXT_ONLY),
        ],
    )
    def test_field_mapping(self, field, expected):
        assert classify_edit(field, "old", "new") is expected

    def test_noop_edit_rejected(self):
        with pytest.raises(NoOpEdit):
            classify_edit("subject", "Alice", "Alice")

    def test_unknown_field_rejected(self):
        with pytest.raises(ValueError):
            classify_edit("policyNumber", "policy1", "policy2")

    def test_context_none_to_window(self):
        assert classify_edit("context", "None", "weekdays 9-5") is EditType.CONTEXT_CHANGE


class TestReferenceOracle:
    def test_rename_updates_both_referencing_policies(self):
        policies = five_policy_fixture()
        # the user edit lands on the field first, as in the live flow
        policies[0].resource = "Front Door Camera"
        result = reference_oracle(rename_edit(), policies)
        assert result.has_ripple is True
        assert "2 policies" in result.summary
        assert result.policies[0].description == "Office Manager can view Front Door Camera at any time"
        assert result.policies[1].resource == "Front Door Camera"
        assert result.policies[1].description.startswith("Security Staff can review Front Door Camera")
        # untouched policies byte-identical
        assert result.policies[2].to_wire() == policies[2].to_wire()
        assert result.policies[3].to_wire() == policies[3].to_wire()

    def test_idempotent(self):
        policies = five_policy_fixture()
        policies[0].resource = "Front Door Camera"
        once = reference_oracle(rename_edit(), policies)
        twice = reference_oracle(rename_edit(), once.policies)
        assert [p.to_wire() for p in twice.policies] == [p.to_wire() for p in once.policies]

    def test_whole_token_matching(self):
        policies = five_policy_fixture()
        policies[0].description = "Office Manager can view Lobby Cameras and the Lobby Camera"
        result = reference_oracle(rename_edit(), policies)
        assert result.policies[0].description == (
            "Office Manager can view Lobby Cameras and the Front Door Camera"
        )

    def test_policy_number_and_elements_untouched(self):
        policies = five_policy_fixture()
        result = reference_oracle(rename_edit(old="policy1", new="rule1", field="subject", policy="policy1"), policies)
        assert [p.policy_number for p in result.policies] == [f"policy{i}" for i in range(1, 6)]
        assert result.policies[0].elements == ["[1]", "[2]"]

    def test_text_only_changes_nothing_and_reports_no_ripple(self):
        policies = five_policy_fixture()
        edit = describe_edit("policy1", "description", policies[0].description, "A new description")
        result = reference_oracle(edit, policies)
        assert result.has_ripple is False
        assert [p.to_wire() for p in result.policies] == [p.to_wire() for p in policies]

    def test_rejects_action_change(self):
        with pytest.raises(ValueError):
            reference_oracle(describe_edit("policy1", "action", "view", "control"), [])


def phase1_response_from_oracle(edit, policies) -> str:
    oracle = reference_oracle(edit, policies)
    return json.dumps(
        {
            "hasRipple": oracle.has_ripple,
            "summary": oracle.summary,
            "policies": [p.to_wire() for p in oracle.policies],
        }
    )


class TestPropagatePolicies:
    def test_text_only_fast_path_zero_calls(self):
        policies = five_policy_fixture()
        edit = describe_edit("policy1", "description", "x", "y")
        log = CallLog()
        result = propagate_policies(edit, policies, ScriptedTransport([]), log)
        assert result.has_ripple is False
        assert result.source == "fast-path"
        assert len(log) == 0

    def test_scripted_oracle_output_accepted_as_model(self):
        policies = five_policy_fixture()
        policies[0].resource = "Front Door Camera"
        edit = rename_edit()
        transport = ScriptedTransport([("policy_propagation", phase1_response_from_oracle(edit, policies))])
        log = CallLog()
        result = propagate_policies(edit, policies, transport, log)
        oracle = reference_oracle(edit, policies)
        assert [p.to_wire() for p in result.policies] == [p.to_wire() for p in oracle.policies]
        assert result.source == "model"
        assert result.degraded is False
        assert len(log) == 1

    def test_divergent_model_output_loses_to_oracle(self):
        policies = five_policy_fixture()
        policies[0].resource = "Front Door Camera"
        edit = rename_edit()
        oracle = reference_oracle(edit, policies)
        divergent = json.loads(phase1_response_from_oracle(edit, policies))
        divergent["policies"][1]["description"] = "Security Staff may do whatever they like"
        transport = ScriptedTransport([("policy_propagation", json.dumps(divergent))])
        result = propagate_policies(edit, policies, transport, CallLog())
        assert result.source == "oracle"
        assert [p.to_wire() for p in result.policies] == [p.to_wire() for p in oracle.policies]

    def test_short_list_falls_back_to_original(self):
        policies = five_policy_fixture()
        policies[0].resource = "Front Door Camera"
        edit = rename_edit()
        short = json.loads(phase1_response_from_oracle(edit, policies))
        short["policies"] = short["policies"][:1]
        result = propagate_policies(edit, policies, ScriptedTransport([json.dumps(short)]), CallLog())
        assert result.degraded is True
        assert result.source == "fallback-original"
        assert [p.to_wire() for p in result.policies] == [p.to_wire() for p in policies]

    def test_transport_error_falls_back_to_oracle_for_rename(self):
        policies = five_policy_fixture()
        policies[0].resource = "Front Door Camera"
        edit = rename_edit()
        transport = ScriptedTransport([TransportError("down"), TransportError("down")])
        result = propagate_policies(edit, policies, transport, CallLog())
        assert result.source == "oracle"
        oracle = reference_oracle(edit, policies)
        assert [p.to_wire() for p in result.policies] == [p.to_wire() for p in oracle.policies]

    def test_action_change_touches_only_edited_policy(self):
        policies = five_policy_fixture()
        policies[0].action = "view and zoom"
        edit = describe_edit("policy1", "action", "view", "view and zoom")
        response = {
            "hasRipple": True,
            "summary": "Updated policy1 description for the new action",
            "policies": [p.to_wire() for p in policies],
        }
        response["policies"][0]["description"] = "Office Manager can view and zoom Lobby Camera at any time"
        response["policies"][2]["description"] = "THE MODEL SHOULD NOT HAVE TOUCHED THIS"
        result = propagate_policies(edit, policies, ScriptedTransport([json.dumps(response)]), CallLog())
        assert result.policies[0].description == "Office Manager can view and zoom Lobby Camera at any time"
        assert result.policies[2].description == "Visitors cannot open the Supply Closet"

    def test_action_change_transport_error_keeps_originals(self):
        policies = five_policy_fixture()
        edit = describe_edit("policy1", "action", "view", "control")
        transport = ScriptedTransport([TransportError("down"), TransportError("down")])
        result = propagate_policies(edit, policies, transport, CallLog())
        assert result.degraded is True
        assert [p.to_wire() for p in result.policies] == [p.to_wire() for p in policies]


def insight_cards():
    risk = insight_from_wire(json.loads(json.dumps(fx.RISK1)))
    heading_doc = {
        "id": "ambiguity1",
        "type": "ambiguity",
        "heading": "When may Security Staff review Lobby Camera footage?",
        "description": "The nightly window for Lobby Camera review is vague.",
        "elements": ["[2]", "[3]"],
        "rationale": (
            "What's happening: Security Staff -> review recordings -> Lobby Camera (nightly)"
            " | What's expected: Review windows should be precise"
            " | Why it matters: 'Nightly' is not an enforceable window"
        ),
    }
    return [risk, insight_from_wire(heading_doc)]


class TestOracleInsights:
    def test_silent_swap_no_markers(self):
        edit = rename_edit()
        cards = insight_cards()
        result = oracle_insights(edit, cards)
        swapped = result.insights[1]
        assert "Front Door Camera" in swapped.heading
        assert "[Updated]" not in swapped.heading
        assert "Front Door Camera" in swapped.rationale.happening
        assert result.has_changes is True

    def test_untouched_card_byte_identical(self):
        edit = rename_edit()
        cards = insight_cards()
        result = oracle_insights(edit, cards)
        assert result.insights[0].to_wire() == cards[0].to_wire()


def phase2_response(cards) -> str:
    return json.dumps(
        {
            "hasChanges": True,
            "summary": "updated",
            "insights": [c.to_wire() for c in cards],
        }
    )


class TestPropagateInsights:
    def test_gate_skips_without_ripple(self):
        edit = rename_edit()
        phase1 = RippleResult(has_ripple=False, summary="none", policies=[])
        log = CallLog()
        result = propagate_insights(edit, phase1, insight_cards(), ScriptedTransport([]), log)
        assert result.skipped is True
        assert len(log) == 0

    def test_gate_skips_without_insights(self):
        edit = rename_edit()
        phase1 = RippleResult(has_ripple=True, summary="renamed", policies=[])
        log = CallLog()
        result = propagate_insights(edit, phase1, [], ScriptedTransport([]), log)
        assert result.skipped is True
        assert len(log) == 0

    def test_rename_swap_via_model_matches_oracle(self):
        edit = rename_edit()
        cards = insight_cards()
        oracle = oracle_insights(edit, cards)
        phase1 = RippleResult(has_ripple=True, summary="renamed", policies=[])
        transport = ScriptedTransport([("insight_propagation", phase2_response(oracle.insights))])
        log = CallLog()
        result = propagate_insights(edit, phase1, cards, transport, log)
        assert [c.to_wire() for c in result.insights] == [c.to_wire() for c in oracle.insights]
        assert len(log) == 1

    def test_rename_divergence_loses_to_oracle(self):
        edit = rename_edit()
        cards = insight_cards()
        oracle = oracle_insights(edit, cards)
        tampered = [c.copy() for c in oracle.insights]
        tampered[1].heading = tampered[1].heading + " [Updated]"  # markers are wrong for renames
        phase1 = RippleResult(has_ripple=True, summary="renamed", policies=[])
        result = propagate_insights(edit, phase1, cards, ScriptedTransport([phase2_response(tampered)]), CallLog())
        assert result.source == "oracle"
        assert [c.to_wire() for c in result.insights] == [c.to_wire() for c in oracle.insights]

    def test_context_change_appends_markers_exactly_once(self):
        edit = describe_edit("policy2", "context", "nightly", "11pm-5am")
        cards = insight_cards()
        answered = [c.copy() for c in cards]
        answered[1].heading = answered[1].heading + " [Updated]"
        answered[1].description = answered[1].description + " [Edit: may be affected by the new 11pm-5am window]"
        phase1 = RippleResult(has_ripple=True, summary="context updated", policies=[])
        result = propagate_insights(edit, phase1, cards, ScriptedTransport([phase2_response(answered)]), CallLog())
        updated = result.insights[1]
        assert updated.heading.endswith(" [Updated]")
        assert updated.heading.count("[Updated]") == 1
        assert updated.description.count("[Edit:") == 1

        # re-running phase 2 on its own output must not double the markers
        second = propagate_insights(
            edit, phase1, result.insights, ScriptedTransport([phase2_response(result.insights)]), CallLog()
        )
        assert second.insights[1].heading.count("[Updated]") == 1
        assert second.insights[1].description.count("[Edit:") == 1

    def test_identity_fields_pinned(self):
        edit = describe_edit("policy2", "context", "nightly", "11pm-5am")
        cards = insight_cards()
        cards[0].is_accepted = True
        tampered = [c.copy() for c in cards]
        tampered[0].is_accepted = None
        tampered[0].elements = ["[9]"]
        phase1 = RippleResult(has_ripple=True, summary="s", policies=[])
        result = propagate_insights(edit, phase1, cards, ScriptedTransport([phase2_response(tampered)]), CallLog())
        assert result.insights[0].is_accepted is True
        assert result.insights[0].elements == fx.RISK1["elements"]

    def test_short_list_falls_back_to_original(self):
        edit = rename_edit()
        cards = insight_cards()
        phase1 = RippleResult(has_ripple=True, summary="renamed", policies=[])
        short = json.dumps({"hasChanges": True, "summary": "s", "insights": [cards[0].to_wire()]})
        result = propagate_insights(edit, phase1, cards, ScriptedTransport([short]), CallLog())
        assert result.degraded is True
        assert [c.to_wire() for c in result.insights] == [c.to_wire() for c in cards]


from hypothesis import given, strategies as st

_name = st.text(alphabet="ABCDEFGHabcdefgh ", min_size=1, max_size=12).filter(
    lambda s: s.strip() == s and s
)


@given(old=_name, new=_name, filler=st.text(alphabet="xyz ,.", max_size=20))
def test_oracle_idempotence_property(old, new, filler):
    # renaming is idempotent whenever the new name does not reintroduce the old token
    if old == new or old in new:
        return
    policies = five_policy_fixture()
    policies[0].subject = new
    policies[1].description = f"{old} {filler} {old}"
    edit = describe_edit("policy1", "subject", old, new)
    once = reference_oracle(edit, policies)
    twice = reference_oracle(edit, once.policies)
    assert [p.to_wire() for p in twice.policies] == [p.to_wire() for p in once.policies]
