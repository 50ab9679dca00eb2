/** Wire types mirroring the session service's JSON documents. */

export type Stage = "specify" | "analyze" | "test";

export type IssueType = "risk" | "ambiguity" | "conflict" | "vignette";

export type ExpectedOutcome = "Allow" | "Deny" | "Ambiguous";

export type SemanticRole = "subject" | "action" | "resource" | "context";

export interface BBox {
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface RawShapeWire {
  shapeId: string;
  kind: string;
  bbox: BBox;
  text?: string;
}

export interface NumberedMarkWire {
  markNumber: number;
  shapeId: string;
  bbox: BBox;
}

export interface EntityWire {
  entityId: number;
  role: SemanticRole;
  label: string;
  memberMarks: number[];
  relatedEntities: number[];
}

export interface PolicyWire {
  policyNumber: string;
  description: string;
  explanation: string;
  subject: string;
  resource: string;
  action: string;
  context: string;
  elements: string[];
}

export interface InsightCardWire {
  id: string;
  type: IssueType;
  heading: string;
  description: string;
  elements: string[];
  rationale: string;
  isAccepted?: boolean;
  expectedOutcome?: ExpectedOutcome;
  relevantPolicies?: string[];
}

export interface GuidanceCardWire {
  order: number;
  prompt: string;
}

export interface LedgerEntryWire {
  card: InsightCardWire;
  lifecycle: "active" | "accepted" | "dismissed";
  dismissReason?: string;
}

export interface SessionView {
  sessionId: string;
  stage: Stage;
  scenarioContext: string;
  policies: PolicyWire[];
  insights: LedgerEntryWire[];
  vignettes: InsightCardWire[];
  entities: EntityWire[];
  markMap: NumberedMarkWire[];
  pendingSketchProposal: SketchProposal | null;
  shadowPolicies: unknown;
  suggestedNextAction: string;
  statusNotes: string[];
  callBudget: { count: number; byKind: Record<string, number> };
  guidanceDeck?: GuidanceCardWire[];
}

export interface AnalyzeView {
  chat: string;
  generate: string | null;
  nextAction: "continue" | "test";
  policies: PolicyWire[];
  insights: InsightCardWire[];
}

export interface ClarifyView {
  intent: string;
  response: string;
  dismissed: boolean;
  resolution: {
    chat: string;
    applied: boolean;
    policies: PolicyWire[];
    insights: InsightCardWire[];
    proposedActions: string[];
  } | null;
  sketchProposal: SketchProposal | null;
}

export interface RippleSummaryWire {
  editType: string;
  phase1: { hasRipple: boolean; summary: string; degraded: boolean; source: string };
  phase2: {
    hasChanges: boolean;
    summary: string;
    degraded: boolean;
    skipped: boolean;
    source: string;
  } | null;
  warnings: string[];
}

/** One canvas-editing event from a sketch-sync batch. */
export interface SketchEvent {
  type: "think" | "create" | "edit" | "move" | "delete";
  shapeId?: string;
  intent?: string;
  shape?: Record<string, unknown>;
  text?: string;
  color?: string;
  fill?: string;
  width?: number;
  height?: number;
  x?: number;
  y?: number;
  thought?: string;
}

export interface SketchProposal {
  directive: string;
  proposedActions: string[];
  events: SketchEvent[] | null;
  source: "analysis" | "clarify";
}

/** The three-part structured rationale carried by every card. */
export interface RationaleParts {
  happening: string;
  expected: string;
  consequenceLabel: "Why it matters" | "What this tests";
  consequence: string;
}

export function parseRationale(raw: string): RationaleParts | null {
  const segments = raw.split(" | ");
  if (segments.length !== 3) return null;
  const happening = stripPrefix(segments[0], "What's happening: ");
  const expected = stripPrefix(segments[1], "What's expected: ");
  if (happening === null || expected === null) return null;
  for (const label of ["Why it matters", "What this tests"] as const) {
    const consequence = stripPrefix(segments[2], `${label}: `);
    if (consequence !== null) {
      return { happening, expected, consequenceLabel: label, consequence };
    }
  }
  return null;
}

function stripPrefix(segment: string, prefix: string): string | null {
  return segment.startsWith(prefix) ? segment.slice(prefix.length) : null;
}
