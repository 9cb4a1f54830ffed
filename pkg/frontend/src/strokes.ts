/**
 * Stroke capture and wire-format conversion.
 *
 * The canvas records absolute pointer positions per stroke; the server wants
 * relative 3-tuples [dx, dy, lift] where the first point is (0, 0), each
 * later point is its delta from the previous one (including the jump across
 * a pen lift), and the last point of every stroke carries lift = 1.
 */

export interface CapturedPoint {
  x: number;
  y: number;
  t: number; // capture timestamp, ms
}

export type Stroke = CapturedPoint[];
export type WirePoint = [number, number, number];

export class CanvasStrokeBuffer {
  private committed: Stroke[] = [];
  private active: Stroke | null = null;

  get strokeCount(): number {
    return this.committed.length;
  }

  get isEmpty(): boolean {
    return this.committed.length === 0 && this.active === null;
  }

  beginStroke(x: number, y: number, t: number): void {
    this.active = [{ x, y, t }];
  }

  extendStroke(x: number, y: number, t: number): void {
    if (!this.active) return;
    const last = this.active[this.active.length - 1];
    if (last.x === x && last.y === y) return;
    this.active.push({ x, y, t });
  }

  endStroke(): void {
    if (this.active && this.active.length > 0) {
      this.committed.push(this.active);
    }
    this.active = null;
  }

  strokes(): Stroke[] {
    return this.committed.map((s) => s.slice());
  }

  /** Replace the buffer contents (used when a suggestion is loaded for editing). */
  load(strokes: Stroke[]): void {
    this.committed = strokes.map((s) => s.slice());
    this.active = null;
  }

  removeStroke(index: number): void {
    if (index >= 0 && index < this.committed.length) {
      this.committed.splice(index, 1);
    }
  }

  clear(): void {
    this.committed = [];
    this.active = null;
  }

  snapshot(): Stroke[] {
    return this.strokes();
  }
}

/** Absolute per-stroke positions -> relative 3-tuple payload. */
export function strokesToPayload(strokes: Stroke[]): WirePoint[] {
  const out: WirePoint[] = [];
  let prev: CapturedPoint | null = null;
  for (const stroke of strokes) {
    if (stroke.length === 0) continue;
    stroke.forEach((pt, j) => {
      const dx = prev === null ? 0 : pt.x - prev.x;
      const dy = prev === null ? 0 : pt.y - prev.y;
      out.push([dx, dy, j === stroke.length - 1 ? 1 : 0]);
      prev = pt;
    });
  }
  return out;
}

/** Relative payload -> absolute per-stroke polylines (for rendering suggestions). */
export function payloadToStrokes(points: WirePoint[]): Stroke[] {
  const strokes: Stroke[] = [];
  let current: Stroke = [];
  let x = 0;
  let y = 0;
  points.forEach(([dx, dy, lift], i) => {
    x += dx;
    y += dy;
    current.push({ x, y, t: i });
    if (lift === 1) {
      strokes.push(current);
      current = [];
    }
  });
  if (current.length > 0) strokes.push(current);
  return strokes;
}
