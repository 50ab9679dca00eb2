/** The client-side canvas document and its lossless RawShape serialization. */

import type { BBox, RawShapeWire } from "./types.js";

export interface ShapeStyle {
  color?: string;
  fill?: string;
  dash?: "solid" | "dashed" | "dotted";
  font?: string;
}

export interface CanvasShape {
  shapeId: string;
  kind: string;
  x: number;
  y: number;
  width: number;
  height: number;
  text?: string;
  style: ShapeStyle;
}

export interface Viewport {
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface CanvasDocument {
  shapes: CanvasShape[];
  viewport: Viewport;
}

/** Pre-built domain icon shapes; labels become the shape text. */
export const DOMAIN_ICONS = [
  "person",
  "card-reader",
  "camera",
  "smart-light",
  "smart-speaker",
  "smart-thermostat",
  "microphone",
] as const;

export type DomainIcon = (typeof DOMAIN_ICONS)[number];

export const DOMAIN_ICON_SIZE = { width: 100, height: 80 };

export function isDomainIcon(kind: string): kind is DomainIcon {
  return (DOMAIN_ICONS as readonly string[]).includes(kind);
}

export function emptyDocument(viewport?: Viewport): CanvasDocument {
  return { shapes: [], viewport: viewport ?? { x: 0, y: 0, width: 1200, height: 800 } };
}

let shapeCounter = 0;

export function newShapeId(prefix = "shape"): string {
  shapeCounter += 1;
  return `${prefix}-${Date.now().toString(36)}-${shapeCounter}`;
}

export function addDomainIcon(
  doc: CanvasDocument,
  icon: DomainIcon,
  x: number,
  y: number,
  label?: string,
): CanvasShape {
  const shape: CanvasShape = {
    shapeId: newShapeId(icon),
    kind: icon,
    x,
    y,
    ...DOMAIN_ICON_SIZE,
    text: label,
    style: {},
  };
  doc.shapes.push(shape);
  return shape;
}

/** Geometry is kept to two decimals on the wire; well inside the 0.5-unit
 * round-trip budget. */
function q(value: number): number {
  return Math.round(value * 100) / 100;
}

export function toRawShapes(doc: CanvasDocument): RawShapeWire[] {
  return doc.shapes.map((shape) => {
    const wire: RawShapeWire = {
      shapeId: shape.shapeId,
      kind: shape.kind,
      bbox: { x: q(shape.x), y: q(shape.y), width: q(shape.width), height: q(shape.height) },
    };
    if (shape.text !== undefined) wire.text = shape.text;
    return wire;
  });
}

export function fromRawShapes(shapes: RawShapeWire[], viewport?: Viewport): CanvasDocument {
  return {
    shapes: shapes.map((wire) => ({
      shapeId: wire.shapeId,
      kind: wire.kind,
      x: wire.bbox.x,
      y: wire.bbox.y,
      width: wire.bbox.width,
      height: wire.bbox.height,
      text: wire.text,
      style: {},
    })),
    viewport: viewport ?? { x: 0, y: 0, width: 1200, height: 800 },
  };
}

export function shapeBBox(shape: CanvasShape): BBox {
  return { x: shape.x, y: shape.y, width: shape.width, height: shape.height };
}

export function findShape(doc: CanvasDocument, shapeId: string): CanvasShape | undefined {
  return doc.shapes.find((s) => s.shapeId === shapeId);
}
