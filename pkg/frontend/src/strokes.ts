// Pointer-to-stroke capture: BEGIN on down, coalesced POINTs on move, END
// on up (or synthesized when the pointer leaves the canvas mid-stroke).
// Coordinates are normalized to [0,1]^2 before they reach the wire. While
// disconnected nothing is sent; the caller surfaces the connection banner.

export interface BoardOpPayload {
  kind: "STROKE_BEGIN" | "STROKE_POINT" | "STROKE_END" | "CLEAR";
  board: string;
  stroke?: string;
  point?: [number, number];
  t_ms: number;
}

export interface StrokeCaptureOptions {
  boardId: string;
  send: (payload: BoardOpPayload) => void;
  isConnected: () => boolean;
  now: () => number;
  makeStrokeId: () => string;
  maxPointsPerSecond?: number;
  onDroppedWhileDisconnected?: () => void;
}

const clamp01 = (x: number) => Math.min(1, Math.max(0, x));

export class StrokeCapture {
  private readonly opts: StrokeCaptureOptions;
  private readonly minIntervalMs: number;
  private activeStroke: string | null = null;
  private lastEmitMs = -Infinity;

  constructor(opts: StrokeCaptureOptions) {
    this.opts = opts;
    this.minIntervalMs = 1000 / (opts.maxPointsPerSecond ?? 60);
  }

  get active(): boolean {
    return this.activeStroke !== null;
  }

  pointerDown(nx: number, ny: number): void {
    if (!this.opts.isConnected()) {
      this.opts.onDroppedWhileDisconnected?.();
      return;
    }
    if (this.activeStroke !== null) this.pointerUp();
    this.activeStroke = this.opts.makeStrokeId();
    this.lastEmitMs = this.opts.now();
    this.opts.send({
      kind: "STROKE_BEGIN",
      board: this.opts.boardId,
      stroke: this.activeStroke,
      point: [clamp01(nx), clamp01(ny)],
      t_ms: Math.trunc(this.lastEmitMs),
    });
  }

  pointerMove(nx: number, ny: number): void {
    if (this.activeStroke === null) return;
    if (!this.opts.isConnected()) {
      this.activeStroke = null;
      this.opts.onDroppedWhileDisconnected?.();
      return;
    }
    const now = this.opts.now();
    if (now - this.lastEmitMs < this.minIntervalMs) return; // coalesce to <= cap
    this.lastEmitMs = now;
    this.opts.send({
      kind: "STROKE_POINT",
      board: this.opts.boardId,
      stroke: this.activeStroke,
      point: [clamp01(nx), clamp01(ny)],
      t_ms: Math.trunc(now),
    });
  }

  pointerUp(): void {
    if (this.activeStroke === null) return;
    const stroke = this.activeStroke;
    this.activeStroke = null;
    if (!this.opts.isConnected()) {
      this.opts.onDroppedWhileDisconnected?.();
      return;
    }
    this.opts.send({
      kind: "STROKE_END",
      board: this.opts.boardId,
      stroke,
      t_ms: Math.trunc(this.opts.now()),
    });
  }

  pointerLeave(): void {
    // Leaving the canvas mid-stroke finishes the stroke.
    this.pointerUp();
  }
}

export interface EchoStroke {
  stroke: string;
  points: [number, number][];
  done: boolean;
}

/**
 * Local echo for in-flight strokes: drawn immediately, dropped as soon as
 * the server's sequenced copy covers them. The authoritative board state
 * always comes from the server fold; the echo is presentation only, so a
 * race never changes final stroke order.
 */
export class PendingEcho {
  private pending = new Map<string, EchoStroke>();

  record(payload: BoardOpPayload): void {
    if (payload.kind === "STROKE_BEGIN" && payload.stroke && payload.point) {
      this.pending.set(payload.stroke, { stroke: payload.stroke, points: [payload.point], done: false });
    } else if (payload.kind === "STROKE_POINT" && payload.stroke && payload.point) {
      this.pending.get(payload.stroke)?.points.push(payload.point);
    } else if (payload.kind === "STROKE_END" && payload.stroke) {
      const echo = this.pending.get(payload.stroke);
      if (echo) echo.done = true;
    } else if (payload.kind === "CLEAR") {
      this.pending.clear();
    }
  }

  /** Drop echoes the authoritative board has caught up with. */
  reconcile(authoritative: { strokes: { stroke: string; author: string; points: unknown[]; closed: boolean }[] }, selfId: string): void {
    for (const [strokeId, echo] of [...this.pending]) {
      const acked = authoritative.strokes.find((s) => s.author === selfId && s.stroke === strokeId);
      if (!acked) continue;
      if (acked.closed || acked.points.length >= echo.points.length) {
        this.pending.delete(strokeId);
      }
    }
  }

  overlay(): EchoStroke[] {
    return [...this.pending.values()];
  }
}
