/** Numbered-badge and role-label overlay construction.
 *
 * The service owns mark numbering; the client draws "[N]" badges from the
 * service's mark map onto the export of the current document. Role labels
 * ("Subject: Alice") are placed above each entity's bounding region and
 * stack upward when they would collide, so labels never occlude each
 * other. Rendering goes through a small 2D-context interface so the same
 * code runs against a browser canvas and against test fakes.
 */

import type { CanvasDocument } from "./canvas-doc.js";
import { findShape } from "./canvas-doc.js";
import type { BBox, EntityWire, NumberedMarkWire } from "./types.js";

export class RenderError extends Error {}

/** Subset of CanvasRenderingContext2D the renderers rely on. */
export interface Draw2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

export interface Badge {
  markNumber: number;
  text: string;
  x: number;
  y: number;
}

export interface LabelPlacement {
  entityId: number;
  text: string;
  x: number;
  y: number;
  width: number;
  height: number;
  anchor: BBox;
}

export const BADGE_SIZE = 18;
export const LABEL_HEIGHT = 20;
const LABEL_CHAR_WIDTH = 7.2;
const LABEL_PADDING = 8;
const LABEL_GAP = 4;

/** One "[N]" badge at the top-left corner of each marked shape. */
export function buildNumberedBadges(doc: CanvasDocument, markMap: NumberedMarkWire[]): Badge[] {
  const badges: Badge[] = [];
  for (const mark of markMap) {
    const shape = findShape(doc, mark.shapeId);
    if (!shape) {
      throw new RenderError(`mark ${mark.markNumber} references unknown shape ${mark.shapeId}`);
    }
    badges.push({
      markNumber: mark.markNumber,
      text: `[${mark.markNumber}]`,
      x: shape.x,
      y: shape.y,
    });
  }
  return badges;
}

function roleLabel(entity: EntityWire): string {
  const role = entity.role.charAt(0).toUpperCase() + entity.role.slice(1);
  return `${role}: ${entity.label}`;
}

/** Union bounding box of an entity's member shapes. */
export function entityBBox(
  entity: EntityWire,
  doc: CanvasDocument,
  markMap: NumberedMarkWire[],
): BBox {
  const byNumber = new Map(markMap.map((m) => [m.markNumber, m.shapeId]));
  let minX = Infinity;
  let minY = Infinity;
  let maxX = -Infinity;
  let maxY = -Infinity;
  for (const markNumber of entity.memberMarks) {
    const shapeId = byNumber.get(markNumber);
    const shape = shapeId ? findShape(doc, shapeId) : undefined;
    if (!shape) continue;
    minX = Math.min(minX, shape.x);
    minY = Math.min(minY, shape.y);
    maxX = Math.max(maxX, shape.x + shape.width);
    maxY = Math.max(maxY, shape.y + shape.height);
  }
  if (!Number.isFinite(minX)) {
    throw new RenderError(`entity ${entity.entityId} has no resolvable member shapes`);
  }
  return { x: minX, y: minY, width: maxX - minX, height: maxY - minY };
}

function overlaps(a: LabelPlacement, b: LabelPlacement): boolean {
  return (
    a.x < b.x + b.width &&
    b.x < a.x + a.width &&
    a.y < b.y + b.height &&
    b.y < a.y + a.height
  );
}

/**
 * Role-prefixed labels, one per entity, placed above each entity's
 * bounding region. A label colliding with an already-placed one moves
 * further up until it is clear.
 */
export function buildAnnotationOverlay(
  entities: EntityWire[],
  doc: CanvasDocument,
  markMap: NumberedMarkWire[],
): LabelPlacement[] {
  const placed: LabelPlacement[] = [];
  const ordered = [...entities].sort((a, b) => a.entityId - b.entityId);
  for (const entity of ordered) {
    const anchor = entityBBox(entity, doc, markMap);
    const text = roleLabel(entity);
    const label: LabelPlacement = {
      entityId: entity.entityId,
      text,
      x: anchor.x,
      y: anchor.y - LABEL_HEIGHT - LABEL_GAP,
      width: text.length * LABEL_CHAR_WIDTH + LABEL_PADDING,
      height: LABEL_HEIGHT,
      anchor,
    };
    while (placed.some((other) => overlaps(label, other))) {
      label.y -= LABEL_HEIGHT + LABEL_GAP;
    }
    placed.push(label);
  }
  return placed;
}

/** Deterministic draw of the numbered export: shapes plus [N] badges. */
export function renderNumberedImage(
  ctx: Draw2D,
  doc: CanvasDocument,
  markMap: NumberedMarkWire[],
): Badge[] {
  drawShapes(ctx, doc);
  const badges = buildNumberedBadges(doc, markMap);
  for (const badge of badges) {
    ctx.fillStyle = "#ffd60a";
    ctx.fillRect(badge.x, badge.y, BADGE_SIZE * 1.6, BADGE_SIZE);
    ctx.fillStyle = "#000000";
    ctx.font = "12px sans-serif";
    ctx.fillText(badge.text, badge.x + 2, badge.y + BADGE_SIZE - 5);
  }
  return badges;
}

/** Deterministic draw of the labeled export: shapes plus role labels. */
export function renderSomImage(
  ctx: Draw2D,
  doc: CanvasDocument,
  entities: EntityWire[],
  markMap: NumberedMarkWire[],
): LabelPlacement[] {
  drawShapes(ctx, doc);
  const overlay = buildAnnotationOverlay(entities, doc, markMap);
  for (const label of overlay) {
    ctx.strokeStyle = "#0184f6";
    ctx.lineWidth = 2;
    ctx.strokeRect(label.anchor.x, label.anchor.y, label.anchor.width, label.anchor.height);
    ctx.fillStyle = "#0184f6";
    ctx.fillRect(label.x, label.y, label.width, label.height);
    ctx.fillStyle = "#ffffff";
    ctx.font = "13px sans-serif";
    ctx.fillText(label.text, label.x + 4, label.y + label.height - 5);
  }
  return overlay;
}

function drawShapes(ctx: Draw2D, doc: CanvasDocument): void {
  for (const shape of doc.shapes) {
    ctx.strokeStyle = shape.style.color ?? "#222222";
    ctx.lineWidth = 1.5;
    ctx.strokeRect(shape.x, shape.y, shape.width, shape.height);
    if (shape.text) {
      ctx.fillStyle = shape.style.color ?? "#222222";
      ctx.font = shape.style.font ?? "14px sans-serif";
      ctx.fillText(shape.text, shape.x + 4, shape.y + shape.height / 2);
    }
  }
}

/** Export a canvas element as a PNG blob (browser only). */
export async function canvasToPng(canvas: HTMLCanvasElement): Promise<Blob> {
  return new Promise((resolve, reject) => {
    canvas.toBlob((blob) => {
      if (blob) resolve(blob);
      else reject(new RenderError("canvas export produced no data"));
    }, "image/png");
  });
}
