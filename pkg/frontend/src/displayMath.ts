// The ambient display math, kept operation-for-operation identical to the
// compute path on the server side so both ends of the wire agree on every
// float. Golden tests pin the parity against recorded traces.

import type { Channel } from "./protocol.js";
import { CHANNELS } from "./protocol.js";

export interface DisplayConfig {
  r_min: number;
  r_max: number;
  h_min: number;
  h_max: number;
  d_max: number;
  window_s: number;
}

export const DEFAULT_DISPLAY: DisplayConfig = {
  r_min: 0.2,
  r_max: 1.0,
  h_min: 0.1,
  h_max: 1.0,
  d_max: 8.0,
  window_s: 10.0,
};

export interface DisplayParams {
  participant_id: string;
  t_ms: number;
  heart_radius: number;
  lung_height: number;
  sweat_density: number;
}

export type Sample = [number, number]; // (t_ms, value)

export const NEUTRAL_NORM = 0.5;

export function normalizeWindow(samples: Sample[], windowS: number, nowMs?: number): number {
  if (windowS <= 0) throw new Error("window_s must be positive");
  if (samples.length === 0) throw new Error("empty window");
  const horizon = nowMs === undefined ? samples[samples.length - 1][0] : nowMs;
  const low = horizon - windowS * 1000.0;
  const window = samples.filter(([t]) => low <= t && t <= horizon);
  if (window.length === 0) throw new Error("empty window");
  const vNow = window[window.length - 1][1];
  let lo = window[0][1];
  let hi = window[0][1];
  for (const [, v] of window) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (hi === lo) return 0.5;
  return (vNow - lo) / (hi - lo);
}

function checkNorm(norm: number): void {
  if (!(norm >= 0 && norm <= 1)) throw new Error(`norm out of range: ${norm}`);
}

export function mapBvp(norm: number, cfg: DisplayConfig): number {
  checkNorm(norm);
  return cfg.r_min + norm * (cfg.r_max - cfg.r_min);
}

export function mapResp(norm: number, cfg: DisplayConfig): number {
  checkNorm(norm);
  return cfg.h_min + norm * (cfg.h_max - cfg.h_min);
}

export function mapSc(norm: number, cfg: DisplayConfig): number {
  checkNorm(norm);
  return norm * cfg.d_max;
}

export function computeDisplay(
  frames: Partial<Record<Channel, Sample[]>>,
  cfg: DisplayConfig,
  nowMs: number,
  participantId: string,
): DisplayParams {
  const norms: Record<Channel, number> = { BVP: NEUTRAL_NORM, RESP: NEUTRAL_NORM, SC: NEUTRAL_NORM };
  for (const ch of CHANNELS) {
    const samples = (frames[ch] ?? []).filter(([t]) => t <= nowMs);
    if (samples.length === 0) continue;
    try {
      norms[ch] = normalizeWindow(samples, cfg.window_s, nowMs);
    } catch {
      // nothing inside the window: stay neutral
    }
  }
  return {
    participant_id: participantId,
    t_ms: Math.trunc(nowMs),
    heart_radius: mapBvp(norms.BVP, cfg),
    lung_height: mapResp(norms.RESP, cfg),
    sweat_density: mapSc(norms.SC, cfg),
  };
}

export function neutralDisplay(cfg: DisplayConfig, participantId: string, tMs = 0): DisplayParams {
  return {
    participant_id: participantId,
    t_ms: tMs,
    heart_radius: mapBvp(NEUTRAL_NORM, cfg),
    lung_height: mapResp(NEUTRAL_NORM, cfg),
    sweat_density: mapSc(NEUTRAL_NORM, cfg),
  };
}

// printf-style %.6g, matching the trace/CSV encoding on the wire.
export function format6g(x: number): string {
  if (!Number.isFinite(x)) throw new Error(`cannot format non-finite ${x}`);
  if (x === 0) return "0";
  const exponential = x.toExponential(5); // d.dddddey
  const [, expPart] = exponential.split("e");
  const exp = parseInt(expPart, 10);
  if (exp < -4 || exp >= 6) {
    let [mant] = exponential.split("e");
    if (mant.includes(".")) mant = mant.replace(/0+$/, "").replace(/\.$/, "");
    const sign = exp < 0 ? "-" : "+";
    const abs = Math.abs(exp);
    return `${mant}e${sign}${abs < 10 ? "0" : ""}${abs}`;
  }
  let fixed = x.toFixed(5 - exp);
  if (fixed.includes(".")) fixed = fixed.replace(/0+$/, "").replace(/\.$/, "");
  return fixed;
}

export function displayCsvRow(params: DisplayParams): string {
  return [
    String(params.t_ms),
    params.participant_id,
    format6g(params.heart_radius),
    format6g(params.lung_height),
    format6g(params.sweat_density),
  ].join(",");
}
