/**
 * Scribble wire format shared with the painting service:
 * a JSON array of { points: [[x, y], ...], color: "#RRGGBB", radius: int }.
 *
 * Serialization must be lossless for anything the UI can produce, so colors
 * are kept as hex strings end to end and never converted through floats.
 */

export interface Scribble {
  points: [number, number][];
  color: string;
  radius: number;
}

const HEX_COLOR = /^#[0-9a-f]{6}$/;

export class SchemaError extends Error {}

export function validateScribble(raw: unknown, index: number): Scribble {
  if (typeof raw !== "object" || raw === null) {
    throw new SchemaError(`scribble ${index} is not an object`);
  }
  const obj = raw as Record<string, unknown>;
  if (!Array.isArray(obj.points) || obj.points.length === 0) {
    throw new SchemaError(`scribble ${index} needs a non-empty points array`);
  }
  const points: [number, number][] = obj.points.map((p, i) => {
    if (!Array.isArray(p) || p.length !== 2) {
      throw new SchemaError(`scribble ${index} point ${i} must be [x, y]`);
    }
    const [x, y] = p as [unknown, unknown];
    if (typeof x !== "number" || typeof y !== "number" || !isFinite(x) || !isFinite(y)) {
      throw new SchemaError(`scribble ${index} point ${i} has non-finite coordinates`);
    }
    return [x, y];
  });
  if (typeof obj.color !== "string" || !HEX_COLOR.test(obj.color.toLowerCase())) {
    throw new SchemaError(`scribble ${index} color must be "#RRGGBB", got ${String(obj.color)}`);
  }
  if (typeof obj.radius !== "number" || !Number.isInteger(obj.radius) || obj.radius < 0) {
    throw new SchemaError(`scribble ${index} radius must be a non-negative integer`);
  }
  return { points, color: obj.color.toLowerCase(), radius: obj.radius };
}

export function serializeScribbles(scribbles: Scribble[]): string {
  return JSON.stringify(
    scribbles.map((s) => ({ points: s.points, color: s.color, radius: s.radius })),
  );
}

export function parseScribbles(text: string): Scribble[] {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (e) {
    throw new SchemaError(`scribbles are not valid JSON: ${String(e)}`);
  }
  if (!Array.isArray(raw)) {
    throw new SchemaError("scribbles JSON must be an array");
  }
  return raw.map((item, i) => validateScribble(item, i));
}
