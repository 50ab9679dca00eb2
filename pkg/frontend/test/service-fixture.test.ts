/** Cross-checks against a session exported by the backend service itself
 * (test/service-session.json, produced by the backend's replayed golden
 * session), so client rendering is verified on real service output.
 */

import { describe, expect, it } from "vitest";

import serviceSession from "./service-session.json";

import { buildAnnotationOverlay, buildNumberedBadges } from "../src/annotate.js";
import { fromRawShapes } from "../src/canvas-doc.js";
import { showReasoning } from "../src/reasoning.js";
import type { InsightCardWire, RawShapeWire, SessionView } from "../src/types.js";

const view = serviceSession.sessionView as unknown as SessionView;
const doc = fromRawShapes(serviceSession.sketchShapes as RawShapeWire[]);

describe("against a service-exported session", () => {
  it("numbered badges match the service's mark map one-to-one", () => {
    const badges = buildNumberedBadges(doc, view.markMap);
    expect(badges).toHaveLength(view.markMap.length);
    for (const mark of view.markMap) {
      const badge = badges.find((b) => b.markNumber === mark.markNumber)!;
      expect(badge.text).toBe(`[${mark.markNumber}]`);
      const shape = doc.shapes.find((s) => s.shapeId === mark.shapeId)!;
      expect(badge.x).toBe(shape.x);
      expect(badge.y).toBe(shape.y);
    }
  });

  it("labels carry role prefixes for every service entity", () => {
    const overlay = buildAnnotationOverlay(view.entities, doc, view.markMap);
    expect(overlay).toHaveLength(view.entities.length);
    for (const entity of view.entities) {
      const label = overlay.find((l) => l.entityId === entity.entityId)!;
      const rolePrefix = entity.role.charAt(0).toUpperCase() + entity.role.slice(1);
      expect(label.text).toBe(`${rolePrefix}: ${entity.label}`);
    }
    expect(overlay.map((l) => l.text)).toContain("Subject: Alice");
  });

  it("show-reasoning highlights exactly the entities resolved from card elements", () => {
    const markToEntity = new Map<number, number>();
    for (const entity of view.entities) {
      for (const mark of entity.memberMarks) markToEntity.set(mark, entity.entityId);
    }
    const cards: InsightCardWire[] = [
      ...view.insights.map((entry) => entry.card),
      ...view.vignettes,
    ];
    expect(cards.length).toBeGreaterThan(0);
    for (const card of cards) {
      const reasoning = showReasoning(card, view.entities, doc, view.markMap);
      const expected = new Set<number>();
      for (const ref of card.elements) {
        const match = /^\[([0-9]+)\]$/.exec(ref);
        const entityId = match ? markToEntity.get(Number(match[1])) : undefined;
        if (entityId !== undefined) expected.add(entityId);
      }
      const highlighted = new Set(reasoning.highlights.map((h) => h.entityId));
      expect(highlighted, `card ${card.id}`).toEqual(expected);
      expect(reasoning.rationale, `card ${card.id} rationale`).not.toBeNull();
    }
  });

  it("vignette cards carry expected outcomes and policy links", () => {
    for (const vignette of view.vignettes) {
      expect(["Allow", "Deny", "Ambiguous"]).toContain(vignette.expectedOutcome);
      expect(vignette.relevantPolicies && vignette.relevantPolicies.length).toBeTruthy();
    }
  });
});
