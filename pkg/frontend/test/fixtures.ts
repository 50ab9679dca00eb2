/** Test fixtures mirroring the service's golden office-camera session. */

import type { CanvasDocument } from "../src/canvas-doc.js";
import type {
  EntityWire,
  InsightCardWire,
  NumberedMarkWire,
  PolicyWire,
  SessionView,
} from "../src/types.js";

export const DOC: CanvasDocument = {
  shapes: [
    { shapeId: "s-alice", kind: "person", x: 100, y: 200, width: 100, height: 80, text: "Alice", style: {} },
    { shapeId: "s-arrow", kind: "arrow", x: 200, y: 230, width: 300, height: 10, text: "view", style: {} },
    { shapeId: "s-cam", kind: "camera", x: 520, y: 200, width: 100, height: 80, text: "Front Camera", style: {} },
    { shapeId: "s-mgr-icon", kind: "person", x: 100, y: 420, width: 100, height: 80, style: {} },
    { shapeId: "s-mgr-label", kind: "text", x: 100, y: 510, width: 120, height: 30, text: "Office Manager", style: {} },
    { shapeId: "s-mgr-box", kind: "rectangle", x: 90, y: 410, width: 140, height: 140, style: {} },
  ],
  viewport: { x: 0, y: 0, width: 1200, height: 800 },
};

export const MARK_MAP: NumberedMarkWire[] = [
  { markNumber: 1, shapeId: "s-alice", bbox: { x: 100, y: 200, width: 100, height: 80 } },
  { markNumber: 2, shapeId: "s-arrow", bbox: { x: 200, y: 230, width: 300, height: 10 } },
  { markNumber: 3, shapeId: "s-cam", bbox: { x: 520, y: 200, width: 100, height: 80 } },
  { markNumber: 4, shapeId: "s-mgr-icon", bbox: { x: 100, y: 420, width: 100, height: 80 } },
  { markNumber: 5, shapeId: "s-mgr-label", bbox: { x: 100, y: 510, width: 120, height: 30 } },
  { markNumber: 6, shapeId: "s-mgr-box", bbox: { x: 90, y: 410, width: 140, height: 140 } },
];

export const ENTITIES: EntityWire[] = [
  { entityId: 1, role: "subject", label: "Alice", memberMarks: [1], relatedEntities: [2, 3] },
  { entityId: 2, role: "action", label: "view", memberMarks: [2], relatedEntities: [1, 3] },
  { entityId: 3, role: "resource", label: "Front Camera", memberMarks: [3], relatedEntities: [1, 2, 4] },
  { entityId: 4, role: "subject", label: "Office Manager", memberMarks: [4, 5, 6], relatedEntities: [3] },
];

export const POLICY1: PolicyWire = {
  policyNumber: "policy1",
  description: "Alice is allowed to view Front Camera during business hours",
  explanation: "Alice is connected to Front Camera by a directed arrow labelled view.",
  subject: "Alice",
  resource: "Front Camera",
  action: "view",
  context: "during business hours",
  elements: ["[1]", "[2]", "[3]"],
};

export const RISK1: InsightCardWire = {
  id: "risk1",
  type: "risk",
  heading: "Office Manager fully controls Front Camera",
  description: "Office Manager can manage Front Camera without any conditions or oversight.",
  elements: ["[4]", "[3]"],
  rationale:
    "What's happening: Office Manager -> manage -> Front Camera" +
    " | What's expected: Management access should be scoped and conditional" +
    " | Why it matters: Unconditional manage access violates least privilege",
};

export const VIGNETTE1: InsightCardWire = {
  id: "vignette1",
  type: "vignette",
  heading: "Alice checks the feed at 5:05 PM",
  description: "Minutes after closing, Alice opens the Front Camera feed from her desk.",
  elements: ["[1]", "[3]"],
  expectedOutcome: "Deny",
  relevantPolicies: ["policy1"],
  rationale:
    "What's happening: Alice -> view -> Front Camera (just after close)" +
    " | What's expected: viewing is limited to business hours" +
    " | What this tests: timing boundary just outside the window",
};

export function sessionView(overrides: Partial<SessionView> = {}): SessionView {
  return {
    sessionId: "sess-1",
    stage: "analyze",
    scenarioContext: "Office entrance",
    policies: [POLICY1],
    insights: [{ card: RISK1, lifecycle: "active" }],
    vignettes: [VIGNETTE1],
    entities: ENTITIES,
    markMap: MARK_MAP,
    pendingSketchProposal: null,
    shadowPolicies: null,
    suggestedNextAction: "continue",
    statusNotes: [],
    callBudget: { count: 2, byKind: {} },
    ...overrides,
  };
}
