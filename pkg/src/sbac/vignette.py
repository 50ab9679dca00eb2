"""Boundary-probing test pipeline: decompose, enumerate, score, select, realize.

The model decomposes each policy into variable factors with boundary
types; everything between that and story realization is deterministic:
candidate enumeration (baseline, single-factor, two-factor), worst-
boundary-wins outcome computation, weighted scoring, and greedy
diversity-aware selection. Realization is strictly translational and is
validated against the selected candidates; any pipeline failure drops to
a single monolithic generation call so vignettes are always produced.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Sequence

from .policy_model import (
    ExpectedOutcome,
    InsightCard,
    Policy,
    Violation,
    WireFormatError,
    validate_insight,
)
from .gateway import (
    CallKind,
    CallLog,
    ChatRequest,
    MONOLITHIC_TEST,
    RealizeParse,
    SchemaError,
    TextPart,
    invoke,
    parse_structured,
    render_prompt,
)

PER_POLICY_CAP = 40
DEFAULT_K = 6

# Table-driven scoring weights: ambiguity, boundary proximity, conflict
# potential, coverage diversity, novelty.
WEIGHTS = {
    "ambiguity": 0.25,
    "boundaryProximity": 0.20,
    "conflictPotential": 0.20,
    "coverageDiversity": 0.20,
    "novelty": 0.15,
}

# Boundary proximity rewards exact policy edges; mid values for the
# softer positions, and a floor for pure baseline confirmation cases.
_PROXIMITY = {
    "ambiguous": 1.0,
    "just_outside": 1.0,
    "just_inside": 0.6,
    "clearly_outside": 0.3,
}
_BASELINE_PROXIMITY = 0.1


class BoundaryType(Enum):
    BASELINE = "baseline"
    JUST_INSIDE = "just_inside"
    JUST_OUTSIDE = "just_outside"
    CLEARLY_OUTSIDE = "clearly_outside"
    AMBIGUOUS = "ambiguous"


class Dimension(Enum):
    SUBJECT = "subject"
    RESOURCE = "resource"
    ACTION = "action"
    CONTEXT = "context"


class RealizationInvalid(RuntimeError):
    """Story realization failed validation after the allowed re-ask."""


class TestUnavailable(RuntimeError):
    """Even the monolithic fallback could not produce valid vignettes."""


@dataclass(frozen=True)
class FactorValue:
    value: str
    label: str
    is_baseline: bool
    boundary_type: BoundaryType

    def to_wire(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "label": self.label,
            "isBaseline": self.is_baseline,
            "boundaryType": self.boundary_type.value,
        }


@dataclass
class VariableFactor:
    name: str
    dimension: Dimension
    policy_value: FactorValue
    alternatives: list[FactorValue]
    rationale: str
    interaction_hints: list[str] = field(default_factory=list)

    def to_wire(self) -> dict[str, Any]:
        doc = {
            "name": self.name,
            "dimension": self.dimension.value,
            "policyValue": self.policy_value.to_wire(),
            "alternatives": [a.to_wire() for a in self.alternatives],
            "rationale": self.rationale,
        }
        if self.interaction_hints:
            doc["interactionHints"] = list(self.interaction_hints)
        return doc


@dataclass
class PolicyAnalysis:
    identified_ambiguities: list[str] = field(default_factory=list)
    identified_risks: list[str] = field(default_factory=list)
    under_specified_conditions: list[str] = field(default_factory=list)
    conflicts_with_policies: list[str] = field(default_factory=list)

    def to_wire(self) -> dict[str, Any]:
        return {
            "identifiedAmbiguities": list(self.identified_ambiguities),
            "identifiedRisks": list(self.identified_risks),
            "underSpecifiedConditions": list(self.under_specified_conditions),
            "conflictsWithPolicies": list(self.conflicts_with_policies),
        }


@dataclass
class PolicySchema:
    policy_number: str
    explanation: str
    fixed_factors: dict[str, str]
    variable_factors: list[VariableFactor]
    policy_analysis: PolicyAnalysis

    def to_wire(self) -> dict[str, Any]:
        return {
            "policyNumber": self.policy_number,
            "explanation": self.explanation,
            "fixedFactors": dict(self.fixed_factors),
            "variableFactors": [f.to_wire() for f in self.variable_factors],
            "policyAnalysis": self.policy_analysis.to_wire(),
        }


@dataclass
class ScoreBreakdown:
    ambiguity: float
    boundary_proximity: float
    conflict_potential: float
    coverage_diversity: float
    novelty: float

    @property
    def total(self) -> float:
        return (
            WEIGHTS["ambiguity"] * self.ambiguity
            + WEIGHTS["boundaryProximity"] * self.boundary_proximity
            + WEIGHTS["conflictPotential"] * self.conflict_potential
            + WEIGHTS["coverageDiversity"] * self.coverage_diversity
            + WEIGHTS["novelty"] * self.novelty
        )

    def to_wire(self) -> dict[str, float]:
        return {
            "ambiguity": self.ambiguity,
            "boundaryProximity": self.boundary_proximity,
            "conflictPotential": self.conflict_potential,
            "coverageDiversity": self.coverage_diversity,
            "novelty": self.novelty,
            "total": self.total,
        }


@dataclass
class CandidateCase:
    case_id: str
    source_policy: str
    assignments: dict[str, FactorValue]
    varied_factors: list[str]
    expected_outcome: ExpectedOutcome
    diagnostics: str
    score: ScoreBreakdown | None = None

    def to_wire(self) -> dict[str, Any]:
        return {
            "caseId": self.case_id,
            "sourcePolicy": self.source_policy,
            "assignments": {name: fv.to_wire() for name, fv in self.assignments.items()},
            "variedFactors": list(self.varied_factors),
            "expectedOutcome": self.expected_outcome.value,
            "diagnostics": self.diagnostics,
            **({"scoreBreakdown": self.score.to_wire()} if self.score else {}),
        }


def factor_value_from_wire(doc: Any, path: str) -> FactorValue:
    if not isinstance(doc, dict):
        raise WireFormatError(path, "expected an object")
    for key in doc:
        if key not in {"value", "label", "isBaseline", "boundaryType"}:
            raise WireFormatError(f"{path}.{key}", "unknown field")
    try:
        boundary = BoundaryType(doc.get("boundaryType"))
    except ValueError:
        raise WireFormatError(f"{path}.boundaryType", f"unknown boundary type {doc.get('boundaryType')!r}") from None
    value = doc.get("value")
    label = doc.get("label")
    is_baseline = doc.get("isBaseline")
    if not isinstance(value, str) or not isinstance(label, str) or not isinstance(is_baseline, bool):
        raise WireFormatError(path, "value/label must be strings and isBaseline a boolean")
    return FactorValue(value=value, label=label, is_baseline=is_baseline, boundary_type=boundary)


def schemas_from_wire(items: Sequence[Any]) -> list[PolicySchema]:
    """Decode the decomposition response's schemas array (strict)."""
    schemas = []
    for i, doc in enumerate(items):
        path = f"$.schemas[{i}]"
        if not isinstance(doc, dict):
            raise WireFormatError(path, "expected an object")
        for key in doc:
            if key not in {"policyNumber", "explanation", "fixedFactors", "variableFactors", "policyAnalysis"}:
                raise WireFormatError(f"{path}.{key}", "unknown field")
        fixed = doc.get("fixedFactors", {})
        if not isinstance(fixed, dict) or not all(isinstance(v, str) for v in fixed.values()):
            raise WireFormatError(f"{path}.fixedFactors", "expected a string map")
        raw_factors = doc.get("variableFactors")
        if not isinstance(raw_factors, list):
            raise WireFormatError(f"{path}.variableFactors", "missing or not a list")
        factors = []
        for j, rf in enumerate(raw_factors):
            fpath = f"{path}.variableFactors[{j}]"
            if not isinstance(rf, dict):
                raise WireFormatError(fpath, "expected an object")
            for key in rf:
                if key not in {"name", "dimension", "policyValue", "alternatives", "rationale", "interactionHints"}:
                    raise WireFormatError(f"{fpath}.{key}", "unknown field")
            try:
                dimension = Dimension(rf.get("dimension"))
            except ValueError:
                raise WireFormatError(f"{fpath}.dimension", f"unknown dimension {rf.get('dimension')!r}") from None
            alternatives = rf.get("alternatives")
            if not isinstance(alternatives, list):
                raise WireFormatError(f"{fpath}.alternatives", "missing or not a list")
            hints = rf.get("interactionHints", [])
            if not isinstance(hints, list) or not all(isinstance(h, str) for h in hints):
                raise WireFormatError(f"{fpath}.interactionHints", "expected a list of strings")
            factors.append(
                VariableFactor(
                    name=str(rf.get("name", "")),
                    dimension=dimension,
                    policy_value=factor_value_from_wire(rf.get("policyValue"), f"{fpath}.policyValue"),
                    alternatives=[
                        factor_value_from_wire(a, f"{fpath}.alternatives[{k}]")
                        for k, a in enumerate(alternatives)
                    ],
                    rationale=str(rf.get("rationale", "")),
                    interaction_hints=list(hints),
                )
            )
        raw_analysis = doc.get("policyAnalysis", {})
        if not isinstance(raw_analysis, dict):
            raise WireFormatError(f"{path}.policyAnalysis", "expected an object")
        def _str_list(key: str) -> list[str]:
            raw = raw_analysis.get(key, [])
            if not isinstance(raw, list) or not all(isinstance(s, str) for s in raw):
                raise WireFormatError(f"{path}.policyAnalysis.{key}", "expected a list of strings")
            return list(raw)
        schemas.append(
            PolicySchema(
                policy_number=str(doc.get("policyNumber", "")),
                explanation=str(doc.get("explanation", "")),
                fixed_factors=dict(fixed),
                variable_factors=factors,
                policy_analysis=PolicyAnalysis(
                    identified_ambiguities=_str_list("identifiedAmbiguities"),
                    identified_risks=_str_list("identifiedRisks"),
                    under_specified_conditions=_str_list("underSpecifiedConditions"),
                    conflicts_with_policies=_str_list("conflictsWithPolicies"),
                ),
            )
        )
    return schemas


def _normalize_name(name: str) -> str:
    return " ".join("".join(c.lower() if c.isalnum() else " " for c in name).split())


def validate_schemas(
    schemas: Sequence[PolicySchema],
    policies: Sequence[Policy],
    entity_labels: Iterable[str] = (),
) -> list[Violation]:
    """Check decomposition output against the strict pipeline constraints.

    Subject and resource alternatives must name people/things that already
    exist in the policy set or sketch; a decomposition inventing new actors
    is rejected (and the run falls back to monolithic generation).
    """
    known_numbers = {p.policy_number for p in policies}
    known_names = {_normalize_name(p.subject) for p in policies}
    known_names |= {_normalize_name(p.resource) for p in policies}
    known_names |= {_normalize_name(label) for label in entity_labels}
    known_names.discard("")

    report: list[Violation] = []
    for s_i, schema in enumerate(schemas):
        path = f"schemas[{s_i}]"
        if schema.policy_number not in known_numbers:
            report.append(Violation(path, f"unknown policyNumber {schema.policy_number!r}"))
        if not 2 <= len(schema.variable_factors) <= 5:
            report.append(Violation(path, f"need 2-5 variable factors, got {len(schema.variable_factors)}"))
        factor_names = [f.name for f in schema.variable_factors]
        if len(set(factor_names)) != len(factor_names):
            report.append(Violation(path, "duplicate factor names"))
        for factor in schema.variable_factors:
            fpath = f"{path}.{factor.name or '?'}"
            if not 2 <= len(factor.alternatives) <= 4:
                report.append(Violation(fpath, f"need 2-4 alternatives, got {len(factor.alternatives)}"))
            if not factor.policy_value.is_baseline or factor.policy_value.boundary_type is not BoundaryType.BASELINE:
                report.append(Violation(fpath, "policyValue must be the baseline"))
            if not any(a.boundary_type is BoundaryType.JUST_OUTSIDE for a in factor.alternatives):
                report.append(Violation(fpath, "needs at least one just_outside alternative"))
            for alt in factor.alternatives:
                if alt.is_baseline or alt.boundary_type is BoundaryType.BASELINE:
                    report.append(Violation(fpath, f"alternative {alt.value!r} marked baseline"))
                if alt.is_baseline != (alt.boundary_type is BoundaryType.BASELINE):
                    report.append(Violation(fpath, f"alternative {alt.value!r}: isBaseline/boundaryType disagree"))
            if factor.dimension in (Dimension.SUBJECT, Dimension.RESOURCE):
                for alt in factor.alternatives:
                    if (
                        _normalize_name(alt.value) not in known_names
                        and _normalize_name(alt.label) not in known_names
                    ):
                        report.append(
                            Violation(fpath, f"{factor.dimension.value} alternative {alt.value!r} not present in policies or sketch")
                        )
            for hint in factor.interaction_hints:
                if hint not in factor_names:
                    report.append(Violation(fpath, f"interaction hint {hint!r} names no factor"))
    return report


def expected_outcome(boundaries: Iterable[BoundaryType]) -> ExpectedOutcome:
    """Worst-boundary-wins aggregation over a non-empty boundary multiset.

    Any ambiguous factor makes the whole case Ambiguous; otherwise any
    outside factor (just or clearly) makes it Deny; otherwise Allow.
    """
    items = list(boundaries)
    if not items:
        raise ValueError("expected_outcome needs at least one boundary type")
    if any(b is BoundaryType.AMBIGUOUS for b in items):
        return ExpectedOutcome.AMBIGUOUS
    if any(b in (BoundaryType.JUST_OUTSIDE, BoundaryType.CLEARLY_OUTSIDE) for b in items):
        return ExpectedOutcome.DENY
    return ExpectedOutcome.ALLOW


def _case_id(policy_number: str, varied: dict[str, FactorValue]) -> str:
    if not varied:
        return f"{policy_number}:baseline"
    keys = ",".join(sorted(f"{name}={fv.value}" for name, fv in varied.items()))
    return f"{policy_number}:{keys}"


def _make_case(schema: PolicySchema, varied: dict[str, FactorValue]) -> CandidateCase:
    assignments = {f.name: f.policy_value for f in schema.variable_factors}
    assignments.update(varied)
    outcome = expected_outcome(fv.boundary_type for fv in assignments.values())
    if varied:
        detail = ", ".join(
            f"{name}={fv.value} ({fv.boundary_type.value})" for name, fv in sorted(varied.items())
        )
        diagnostics = f"varied {detail}"
    else:
        diagnostics = "baseline confirmation"
    return CandidateCase(
        case_id=_case_id(schema.policy_number, varied),
        source_policy=schema.policy_number,
        assignments=assignments,
        varied_factors=sorted(varied),
        expected_outcome=outcome,
        diagnostics=diagnostics,
    )


def _pair_order(schema: PolicySchema) -> list[tuple[int, int]]:
    """Unordered factor pairs, interaction-hinted ones first, then the rest."""
    index = {f.name: i for i, f in enumerate(schema.variable_factors)}
    ordered: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    for i, factor in enumerate(schema.variable_factors):
        for hint in factor.interaction_hints:
            j = index.get(hint)
            if j is None or j == i:
                continue
            pair = (min(i, j), max(i, j))
            if pair not in seen:
                seen.add(pair)
                ordered.append(pair)
    n = len(schema.variable_factors)
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in seen:
                seen.add((i, j))
                ordered.append((i, j))
    return ordered


def enumerate_candidates(
    schemas: Sequence[PolicySchema], per_policy_cap: int = PER_POLICY_CAP
) -> list[CandidateCase]:
    """Deterministically enumerate baseline, single- and two-factor cases.

    Per schema: one all-baseline case, one case per (factor, alternative),
    then two-factor combinations in pair order until the per-policy cap;
    the cap truncates two-factor cases from the end of the enumeration.
    """
    out: list[CandidateCase] = []
    for schema in schemas:
        cases: list[CandidateCase] = [_make_case(schema, {})]
        for factor in schema.variable_factors:
            for alt in factor.alternatives:
                cases.append(_make_case(schema, {factor.name: alt}))
        for i, j in _pair_order(schema):
            f, g = schema.variable_factors[i], schema.variable_factors[j]
            for alt_f in f.alternatives:
                for alt_g in g.alternatives:
                    cases.append(_make_case(schema, {f.name: alt_f, g.name: alt_g}))
        out.extend(cases[:per_policy_cap])
    return out


def _primary_dimension(case: CandidateCase, schema: PolicySchema) -> Dimension | None:
    for factor in schema.variable_factors:
        if factor.name in case.varied_factors:
            return factor.dimension
    return None


def _varied_value_keys(case: CandidateCase) -> set[tuple[str, str]]:
    return {(name, case.assignments[name].value) for name in case.varied_factors}


def score_candidate(
    case: CandidateCase,
    schemas: Sequence[PolicySchema],
    selected: Sequence[CandidateCase],
) -> ScoreBreakdown:
    """Score one candidate; diversity and novelty are relative to `selected`."""
    schema = next(s for s in schemas if s.policy_number == case.source_policy)

    varied_boundaries = [
        case.assignments[name].boundary_type for name in case.varied_factors
    ]
    if varied_boundaries:
        boundary_proximity = max(_PROXIMITY[b.value] for b in varied_boundaries)
    else:
        boundary_proximity = _BASELINE_PROXIMITY

    if case.expected_outcome is ExpectedOutcome.AMBIGUOUS:
        ambiguity = 1.0
    else:
        flagged_terms = (
            schema.policy_analysis.identified_ambiguities
            + schema.policy_analysis.under_specified_conditions
        )
        hit = any(
            name.lower() in term.lower()
            for name in case.varied_factors
            for term in flagged_terms
        )
        ambiguity = 0.5 if hit else 0.0

    conflicts = schema.policy_analysis.conflicts_with_policies
    if conflicts:
        contested_dim = any(
            factor.dimension in (Dimension.SUBJECT, Dimension.RESOURCE)
            for factor in schema.variable_factors
            if factor.name in case.varied_factors
        )
        conflict_potential = 1.0 if contested_dim else 0.5
    else:
        conflict_potential = 0.0

    n_selected = len(selected)
    primary = _primary_dimension(case, schema)
    same_policy = sum(1 for s in selected if s.source_policy == case.source_policy)
    same_dim = 0
    for other in selected:
        other_schema = next(s for s in schemas if s.policy_number == other.source_policy)
        if _primary_dimension(other, other_schema) == primary:
            same_dim += 1
    coverage_diversity = 1.0 - (same_policy + same_dim) / (2 * max(1, n_selected))
    coverage_diversity = min(1.0, max(0.0, coverage_diversity))

    own_keys = _varied_value_keys(case)
    if own_keys:
        used: set[tuple[str, str]] = set()
        for other in selected:
            used |= _varied_value_keys(other)
        novelty = len(own_keys - used) / len(own_keys)
    else:
        novelty = 1.0  # vacuous: a baseline case repeats no varied values

    return ScoreBreakdown(
        ambiguity=ambiguity,
        boundary_proximity=boundary_proximity,
        conflict_potential=conflict_potential,
        coverage_diversity=coverage_diversity,
        novelty=novelty,
    )


# All score components are small rationals, so genuinely different totals
# differ by at least ~1e-5; this tolerance only absorbs float-summation
# noise on mathematically equal totals so the caseId tie-break stays
# deterministic.
TIE_EPSILON = 1e-9


def select_greedy(
    candidates: Sequence[CandidateCase],
    k: int,
    schemas: Sequence[PolicySchema],
) -> list[CandidateCase]:
    """Pick up to k cases, re-scoring diversity/novelty after each pick.

    Deterministic: ties on total break by lexicographic caseId. Each pick
    freezes the candidate's score as of selection time.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    remaining = list(candidates)
    selected: list[CandidateCase] = []
    while remaining and len(selected) < k:
        best: CandidateCase | None = None
        best_score: ScoreBreakdown | None = None
        for case in remaining:
            score = score_candidate(case, schemas, selected)
            if (
                best is None
                or score.total > best_score.total + TIE_EPSILON
                or (abs(score.total - best_score.total) <= TIE_EPSILON and case.case_id < best.case_id)
            ):
                best, best_score = case, score
        best.score = best_score
        selected.append(best)
        remaining = [c for c in remaining if c.case_id != best.case_id]
    return selected


@dataclass
class TestRunContext:
    """Everything a test run needs from the session, plus the transport."""

    scenario_context: str
    policies: list[Policy]
    entity_labels: list[str]
    element_map_lines: list[str]
    active_insights: list[InsightCard]
    known_marks: set[int]
    transport: Any
    call_log: CallLog
    k: int = DEFAULT_K
    per_policy_cap: int = PER_POLICY_CAP


@dataclass
class TestRunResult:
    vignettes: list[InsightCard]
    diagnostics: dict[str, Any]


def _policies_json(policies: Sequence[Policy]) -> str:
    return json.dumps([p.to_wire() for p in policies], indent=2)


def _decomposition_request(ctx: TestRunContext) -> ChatRequest:
    user = (
        f"Scenario context:\n{ctx.scenario_context}\n\n"
        f"Canvas element map:\n" + "\n".join(ctx.element_map_lines) + "\n\n"
        f"Current policies:\n{_policies_json(ctx.policies)}"
    )
    return ChatRequest(
        kind=CallKind.FACTOR_DECOMPOSITION,
        system_prompt=render_prompt(CallKind.FACTOR_DECOMPOSITION),
        user_parts=(TextPart(user),),
        schema_id="decompose",
    )


def _realization_request(ctx: TestRunContext, selected: Sequence[CandidateCase], note: str | None = None) -> ChatRequest:
    payload = {
        "scenarioContext": ctx.scenario_context,
        "candidates": [c.to_wire() for c in selected],
        "policies": [p.to_wire() for p in ctx.policies],
    }
    parts: list[TextPart] = [TextPart(json.dumps(payload, indent=2))]
    if note:
        parts.append(TextPart(note))
    return ChatRequest(
        kind=CallKind.STORY_REALIZATION,
        system_prompt=render_prompt(CallKind.STORY_REALIZATION),
        user_parts=tuple(parts),
        schema_id="realize",
    )


def _validate_realization(
    vignettes: list[InsightCard],
    selected: Sequence[CandidateCase],
    ctx: TestRunContext,
) -> list[str]:
    problems: list[str] = []
    if len(vignettes) != len(selected):
        problems.append(f"expected {len(selected)} vignettes, got {len(vignettes)}")
        return problems
    policy_numbers = {p.policy_number for p in ctx.policies}
    seen_ids: set[str] = set()
    for i, (card, case) in enumerate(zip(vignettes, selected)):
        where = f"vignettes[{i}]"
        if card.id in seen_ids:
            problems.append(f"{where}: duplicate id {card.id}")
        seen_ids.add(card.id)
        if card.expected_outcome is not case.expected_outcome:
            problems.append(
                f"{where}: expectedOutcome {card.expected_outcome.value if card.expected_outcome else None!r}"
                f" drifted from computed {case.expected_outcome.value!r}"
            )
        if card.relevant_policies != [case.source_policy]:
            problems.append(f"{where}: relevantPolicies must equal ['{case.source_policy}']")
        for violation in validate_insight(card, ctx.known_marks, policy_numbers):
            problems.append(f"{where}: {violation}")
    return problems


def realize_stories(
    ctx: TestRunContext, selected: Sequence[CandidateCase]
) -> list[InsightCard]:
    """Translate selected candidates into vignette cards, with validation.

    Outcome drift, count mismatch, or any card-level violation triggers a
    single corrective re-ask; a second failure raises RealizationInvalid
    so the caller can fall back.
    """
    if not selected:
        raise ValueError("realization needs a non-empty selection")
    note = None
    last_problems: list[str] = []
    for _ in range(2):
        raw, _record = invoke(_realization_request(ctx, selected, note), ctx.transport, ctx.call_log)
        try:
            parsed: RealizeParse = parse_structured(raw, "realize")
        except SchemaError as exc:
            last_problems = [str(exc)]
        else:
            last_problems = _validate_realization(parsed.vignettes, selected, ctx)
            if not last_problems:
                return parsed.vignettes
        note = (
            "Your previous response was rejected. Fix these problems and respond again "
            "with the full JSON object: " + "; ".join(last_problems)
        )
    raise RealizationInvalid("; ".join(last_problems))


def fallback_monolithic(ctx: TestRunContext) -> list[InsightCard]:
    """Single-call vignette generation used when the pipeline fails."""
    payload = {
        "scenarioContext": ctx.scenario_context,
        "policies": [p.to_wire() for p in ctx.policies],
        "openInsights": [c.to_wire() for c in ctx.active_insights],
        "canvasElementMap": ctx.element_map_lines,
    }
    note = None
    last_problems: list[str] = []
    for _ in range(2):
        parts: list[TextPart] = [TextPart(json.dumps(payload, indent=2))]
        if note:
            parts.append(TextPart(note))
        request = ChatRequest(
            kind=CallKind.STORY_REALIZATION,
            system_prompt=render_prompt(MONOLITHIC_TEST),
            user_parts=tuple(parts),
            schema_id="realize",
        )
        raw, _record = invoke(request, ctx.transport, ctx.call_log)
        try:
            parsed: RealizeParse = parse_structured(raw, "realize")
        except SchemaError as exc:
            last_problems = [str(exc)]
        else:
            policy_numbers = {p.policy_number for p in ctx.policies}
            problems = []
            if not parsed.vignettes:
                problems.append("empty vignette list")
            for i, card in enumerate(parsed.vignettes):
                for violation in validate_insight(card, ctx.known_marks, policy_numbers):
                    problems.append(f"vignettes[{i}]: {violation}")
            last_problems = problems
            if not problems:
                return parsed.vignettes
        note = (
            "Your previous response was rejected. Fix these problems and respond again "
            "with the full JSON object: " + "; ".join(last_problems)
        )
    raise TestUnavailable("; ".join(last_problems))


def run_test_pipeline(ctx: TestRunContext) -> TestRunResult:
    """Full Test-stage run: decompose, enumerate, score, select, realize.

    Any stage failure (decomposition parse, schema validation, realization)
    switches to the monolithic fallback; the diagnostics document records
    candidates, scores, selection order, and which path produced output.
    """
    diagnostics: dict[str, Any] = {"mode": "pipeline", "fallbackUsed": False, "failure": None}

    schemas: list[PolicySchema] | None = None
    try:
        raw, _record = invoke(_decomposition_request(ctx), ctx.transport, ctx.call_log)
        schemas = parse_structured(raw, "decompose")
    except SchemaError as exc:
        diagnostics["failure"] = f"decomposition: {exc}"

    if schemas is not None:
        report = validate_schemas(schemas, ctx.policies, ctx.entity_labels)
        if report:
            diagnostics["failure"] = "validation: " + "; ".join(str(v) for v in report)
            schemas = None

    if schemas is not None:
        candidates = enumerate_candidates(schemas, ctx.per_policy_cap)
        selected = select_greedy(candidates, ctx.k, schemas) if candidates else []
        diagnostics["candidates"] = [c.to_wire() for c in candidates]
        diagnostics["selectionOrder"] = [c.case_id for c in selected]
        if not selected:
            diagnostics["failure"] = "enumeration produced no candidates"
        else:
            try:
                vignettes = realize_stories(ctx, selected)
                return TestRunResult(vignettes=vignettes, diagnostics=diagnostics)
            except RealizationInvalid as exc:
                diagnostics["failure"] = f"realization: {exc}"

    diagnostics["mode"] = "fallback"
    diagnostics["fallbackUsed"] = True
    vignettes = fallback_monolithic(ctx)
    return TestRunResult(vignettes=vignettes, diagnostics=diagnostics)
