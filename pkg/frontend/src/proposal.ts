/** Applies an approved sketch-sync event batch to the canvas document.
 *
 * Edits happen in place (an edit never becomes delete+create, which would
 * sever arrow bindings); unknown targets are skipped and reported.
 */

import type { CanvasDocument, CanvasShape } from "./canvas-doc.js";
import { DOMAIN_ICON_SIZE, isDomainIcon, newShapeId } from "./canvas-doc.js";
import type { SketchEvent } from "./types.js";

export interface ApplyResult {
  created: string[];
  edited: string[];
  moved: string[];
  deleted: string[];
  skipped: string[];
}

export function applySketchEvents(doc: CanvasDocument, events: SketchEvent[]): ApplyResult {
  const result: ApplyResult = { created: [], edited: [], moved: [], deleted: [], skipped: [] };
  const byId = new Map(doc.shapes.map((s) => [s.shapeId, s]));

  const resolve = (event: SketchEvent): CanvasShape | undefined =>
    event.shapeId ? byId.get(event.shapeId) : undefined;

  for (const event of events) {
    switch (event.type) {
      case "think":
        break;
      case "create": {
        const spec = event.shape ?? {};
        const kind = typeof spec.type === "string" ? spec.type : "rectangle";
        const defaults = isDomainIcon(kind) ? DOMAIN_ICON_SIZE : { width: 100, height: 100 };
        const shape: CanvasShape = {
          shapeId: typeof spec.shapeId === "string" && spec.shapeId ? spec.shapeId : newShapeId(kind),
          kind,
          x: num(spec.x, num(spec.x1, 0)),
          y: num(spec.y, num(spec.y1, 0)),
          width: num(spec.width, defaults.width),
          height: num(spec.height, defaults.height),
          text: typeof spec.text === "string" ? spec.text : undefined,
          style: { color: typeof spec.color === "string" ? spec.color : undefined },
        };
        doc.shapes.push(shape);
        byId.set(shape.shapeId, shape);
        result.created.push(shape.shapeId);
        break;
      }
      case "edit": {
        const target = resolve(event);
        if (!target) {
          result.skipped.push(event.shapeId ?? "?");
          break;
        }
        if (event.text !== undefined) target.text = event.text;
        if (event.color !== undefined) target.style.color = event.color;
        if (event.fill !== undefined) target.style.fill = event.fill;
        if (event.width !== undefined) target.width = event.width;
        if (event.height !== undefined) target.height = event.height;
        result.edited.push(target.shapeId);
        break;
      }
      case "move": {
        const target = resolve(event);
        if (!target) {
          result.skipped.push(event.shapeId ?? "?");
          break;
        }
        if (event.x !== undefined) target.x = event.x;
        if (event.y !== undefined) target.y = event.y;
        result.moved.push(target.shapeId);
        break;
      }
      case "delete": {
        const target = resolve(event);
        if (!target) {
          result.skipped.push(event.shapeId ?? "?");
          break;
        }
        doc.shapes.splice(doc.shapes.indexOf(target), 1);
        byId.delete(target.shapeId);
        result.deleted.push(target.shapeId);
        break;
      }
    }
  }
  return result;
}

function num(value: unknown, fallback: number): number {
  return typeof value === "number" && Number.isFinite(value) ? value : fallback;
}
