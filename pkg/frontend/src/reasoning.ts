/** Show-Reasoning resolution: card elements -> entities -> canvas regions. */

import type { CanvasDocument } from "./canvas-doc.js";
import { entityBBox } from "./annotate.js";
import type { BBox, EntityWire, InsightCardWire, NumberedMarkWire, PolicyWire } from "./types.js";
import { parseRationale, type RationaleParts } from "./types.js";

export interface ReasoningHighlight {
  entityId: number;
  label: string;
  role: string;
  region: BBox;
}

export interface ReasoningView {
  highlights: ReasoningHighlight[];
  rationale: RationaleParts | null;
  unknownRefs: string[];
}

const MARK_REF = /^\[([0-9]+)\]$/;

/**
 * Resolve element references to the entities containing those marks.
 * Highlights exactly the referenced entities: never more, duplicates
 * collapsed, unresolvable references reported.
 */
export function resolveElements(
  elements: string[],
  entities: EntityWire[],
): { entities: EntityWire[]; unknownRefs: string[] } {
  const byMark = new Map<number, EntityWire>();
  for (const entity of entities) {
    for (const mark of entity.memberMarks) byMark.set(mark, entity);
  }
  const seen = new Set<number>();
  const found: EntityWire[] = [];
  const unknownRefs: string[] = [];
  for (const ref of elements) {
    const match = MARK_REF.exec(ref);
    const entity = match ? byMark.get(Number(match[1])) : undefined;
    if (!entity) {
      unknownRefs.push(ref);
    } else if (!seen.has(entity.entityId)) {
      seen.add(entity.entityId);
      found.push(entity);
    }
  }
  return { entities: found, unknownRefs };
}

export function showReasoning(
  card: InsightCardWire,
  entities: EntityWire[],
  doc: CanvasDocument,
  markMap: NumberedMarkWire[],
): ReasoningView {
  const resolved = resolveElements(card.elements, entities);
  return {
    highlights: resolved.entities.map((entity) => ({
      entityId: entity.entityId,
      label: entity.label,
      role: entity.role,
      region: entityBBox(entity, doc, markMap),
    })),
    rationale: parseRationale(card.rationale),
    unknownRefs: resolved.unknownRefs,
  };
}

/** Policies highlight through their element references the same way. */
export function showPolicyReasoning(
  policy: PolicyWire,
  entities: EntityWire[],
  doc: CanvasDocument,
  markMap: NumberedMarkWire[],
): ReasoningHighlight[] {
  const resolved = resolveElements(policy.elements, entities);
  return resolved.entities.map((entity) => ({
    entityId: entity.entityId,
    label: entity.label,
    role: entity.role,
    region: entityBBox(entity, doc, markMap),
  }));
}
