/**
 * The scribble layer: ordered strokes over the sketch, kept separate from
 * the sketch bitmap so the sketch is never mutated. Supports incremental
 * stroke building from pointer events, undo, and lossless round trips
 * through the service wire format.
 */

import { Scribble, parseScribbles, serializeScribbles } from "./schema.js";

export class ScribbleLayer {
  private strokes: Scribble[] = [];
  private active: Scribble | null = null;

  beginStroke(x: number, y: number, color: string, radius: number): void {
    this.active = { points: [[x, y]], color: color.toLowerCase(), radius };
  }

  extendStroke(x: number, y: number): void {
    if (!this.active) return;
    this.active.points.push([x, y]);
  }

  endStroke(): void {
    if (!this.active) return;
    this.strokes.push(this.active);
    this.active = null;
  }

  /** Remove the most recent completed stroke. */
  undo(): boolean {
    if (this.active) {
      this.active = null;
      return true;
    }
    return this.strokes.pop() !== undefined;
  }

  clear(): void {
    this.strokes = [];
    this.active = null;
  }

  get scribbles(): Scribble[] {
    return this.strokes.map((s) => ({
      points: s.points.map((p) => [p[0], p[1]] as [number, number]),
      color: s.color,
      radius: s.radius,
    }));
  }

  get isEmpty(): boolean {
    return this.strokes.length === 0;
  }

  toJSON(): string {
    return serializeScribbles(this.strokes);
  }

  static fromJSON(text: string): ScribbleLayer {
    const layer = new ScribbleLayer();
    layer.strokes = parseScribbles(text);
    return layer;
  }

  /** Draw every stroke as disks swept along its polyline. */
  render(ctx: CanvasRenderingContext2D): void {
    for (const s of this.strokes) {
      drawStroke(ctx, s);
    }
    if (this.active) {
      drawStroke(ctx, this.active);
    }
  }
}

function drawStroke(ctx: CanvasRenderingContext2D, s: Scribble): void {
  ctx.strokeStyle = s.color;
  ctx.fillStyle = s.color;
  ctx.lineWidth = Math.max(1, s.radius * 2);
  ctx.lineCap = "round";
  ctx.lineJoin = "round";
  const first = s.points[0];
  if (!first) return;
  if (s.points.length === 1) {
    ctx.beginPath();
    ctx.arc(first[0], first[1], Math.max(0.5, s.radius), 0, Math.PI * 2);
    ctx.fill();
    return;
  }
  ctx.beginPath();
  ctx.moveTo(first[0], first[1]);
  for (const [x, y] of s.points.slice(1)) {
    ctx.lineTo(x, y);
  }
  ctx.stroke();
}
