// Ambient display rendering: a red circle that beats, a blue cylinder that
// breathes, expanding blue circles that spawn faster as skin conductance
// climbs. The renderer is deliberately passive: it consumes DisplayParams
// as-is and never recomputes any signal mapping. Out-of-range inputs are
// clamped defensively (with a warning) rather than trusted.

import type { DisplayConfig, DisplayParams } from "./displayMath.js";

export const SWEAT_CIRCLE_LIFE_MS = 2000;

export interface SweatCircle {
  bornMs: number;
  x: number; // normalized position within the sweat patch
  y: number;
}

// Deterministic 32-bit RNG for tests and reproducible rendering.
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function poissonSample(rng: () => number, lambda: number): number {
  // Knuth's method; lambda stays small (density * frame dt).
  if (lambda <= 0) return 0;
  const limit = Math.exp(-lambda);
  let k = 0;
  let p = 1;
  do {
    k += 1;
    p *= rng();
  } while (p > limit);
  return k - 1;
}

export class SweatField {
  circles: SweatCircle[] = [];
  spawnedTotal = 0;
  private readonly rng: () => number;

  constructor(rng: () => number = Math.random) {
    this.rng = rng;
  }

  /** Advance by dtMs at the given spawn density (expected spawns/second). */
  advance(nowMs: number, dtMs: number, density: number): number {
    const spawns = poissonSample(this.rng, (Math.max(0, density) * dtMs) / 1000);
    for (let i = 0; i < spawns; i++) {
      this.circles.push({ bornMs: nowMs, x: this.rng(), y: this.rng() });
    }
    this.spawnedTotal += spawns;
    this.circles = this.circles.filter((c) => nowMs - c.bornMs < SWEAT_CIRCLE_LIFE_MS);
    return spawns;
  }
}

export interface AmbientBox {
  x: number;
  y: number;
  w: number;
  h: number;
}

let warnedOutOfRange = false;

export function clampParams(params: DisplayParams, cfg: DisplayConfig): DisplayParams {
  const heart = Math.min(cfg.r_max, Math.max(cfg.r_min, params.heart_radius));
  const lung = Math.min(cfg.h_max, Math.max(cfg.h_min, params.lung_height));
  const sweat = Math.min(cfg.d_max, Math.max(0, params.sweat_density));
  if (
    !warnedOutOfRange &&
    (heart !== params.heart_radius || lung !== params.lung_height || sweat !== params.sweat_density)
  ) {
    warnedOutOfRange = true;
    console.warn("ambient params out of configured range; clamping", params);
  }
  return { ...params, heart_radius: heart, lung_height: lung, sweat_density: sweat };
}

/**
 * Draw one participant's ambient trio into a box. Pixel sizes are plain
 * linear scalings of the display quantities (one display unit = one fixed
 * pixel run), so every mapping decision stays upstream.
 */
export function renderAmbient(
  ctx: CanvasRenderingContext2D,
  rawParams: DisplayParams,
  cfg: DisplayConfig,
  field: SweatField,
  nowMs: number,
  dtMs: number,
  box: AmbientBox,
): void {
  const params = clampParams(rawParams, cfg);
  ctx.clearRect(box.x, box.y, box.w, box.h);

  const third = box.w / 3;

  // Heart: red circle, radius in display units scaled by a fixed pixel run.
  const heartScale = (Math.min(third, box.h) * 0.45) / cfg.r_max;
  ctx.beginPath();
  ctx.fillStyle = "#c0392b";
  ctx.arc(box.x + third / 2, box.y + box.h / 2, params.heart_radius * heartScale, 0, Math.PI * 2);
  ctx.fill();

  // Lung: blue cylinder (rectangle with an elliptical cap), height scaled.
  const lungScale = (box.h * 0.85) / cfg.h_max;
  const lungH = params.lung_height * lungScale;
  const lungW = third * 0.38;
  const lungX = box.x + third + (third - lungW) / 2;
  const lungY = box.y + box.h - lungH;
  ctx.fillStyle = "#2e6da4";
  ctx.fillRect(lungX, lungY, lungW, lungH);
  ctx.beginPath();
  ctx.ellipse(lungX + lungW / 2, lungY, lungW / 2, Math.min(8, lungH * 0.15 + 2), 0, 0, Math.PI * 2);
  ctx.fill();

  // Sweat: expanding, fading blue circles spawned at the density rate.
  field.advance(nowMs, dtMs, params.sweat_density);
  const patchX = box.x + 2 * third;
  for (const circle of field.circles) {
    const age = (nowMs - circle.bornMs) / SWEAT_CIRCLE_LIFE_MS;
    const radius = 3 + age * (third * 0.35);
    ctx.beginPath();
    ctx.strokeStyle = `rgba(46, 109, 164, ${Math.max(0, 1 - age)})`;
    ctx.lineWidth = 1.5;
    ctx.arc(patchX + circle.x * third, box.y + circle.y * box.h, radius, 0, Math.PI * 2);
    ctx.stroke();
  }
}
