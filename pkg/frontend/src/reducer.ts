// Pure view-model reducer. Every state transition is driven by a received
// envelope (or a local connection/toggle event), so any session can be
// replayed in tests from its envelope log. The UI holds no authoritative
// state of its own.
//
// The no-peek rule is enforced here, not only at the server: a frame from a
// peer is stored and displayed only when the server-confirmed consent flags
// say the channel is mutual at that moment. Anything else is dropped and
// recorded as a violation warning.

import type {
  BoardWire,
  Channel,
  ConsentFlags,
  Envelope,
  LessonScript,
  RosterEntry,
  SnapshotPayload,
  StrokeWire,
} from "./protocol.js";
import { CHANNELS } from "./protocol.js";
import type { DisplayConfig, DisplayParams, Sample } from "./displayMath.js";
import { DEFAULT_DISPLAY, computeDisplay, neutralDisplay } from "./displayMath.js";

export type ConnectionState = "connecting" | "open" | "closed";

export interface QuizView {
  judgments: boolean[];
  correct: number;
  score: number;
}

export interface AdvisoryView {
  participant: string;
  advisory: "OK" | "RELAX";
  scr_rate: number;
  threshold: number;
}

export interface ErrorView {
  code: string;
  detail: string;
  re?: string;
}

export interface ViewModel {
  connection: ConnectionState;
  sid: string;
  selfId: string | null;
  roster: RosterEntry[];
  consent: { version: number; flags: ConsentFlags };
  pendingConsent: Partial<Record<Channel, boolean>>;
  boards: Record<string, BoardWire>;
  buffers: Record<string, Partial<Record<Channel, Sample[]>>>;
  displays: Record<string, DisplayParams>;
  lesson: { phase: string; unit: number };
  script: LessonScript | null;
  quiz: QuizView | null;
  advisory: AdvisoryView | null;
  errors: ErrorView[];
  noPeekViolations: string[];
  seqHorizon: number;
  seqGaps: string[];
  displayConfig: DisplayConfig;
}

export type UiEvent =
  | { kind: "connected" }
  | { kind: "disconnected" }
  | { kind: "consentToggle"; channel: Channel; share: boolean }
  | { kind: "envelope"; env: Envelope };

export function initialViewModel(sid: string): ViewModel {
  return {
    connection: "connecting",
    sid,
    selfId: null,
    roster: [],
    consent: { version: 0, flags: {} },
    pendingConsent: {},
    boards: {},
    buffers: {},
    displays: {},
    lesson: { phase: "INTRO", unit: 0 },
    script: null,
    quiz: null,
    advisory: null,
    errors: [],
    noPeekViolations: [],
    seqHorizon: 0,
    seqGaps: [],
    displayConfig: DEFAULT_DISPLAY,
  };
}

export function consentOf(flags: ConsentFlags, pid: string, channel: Channel): boolean {
  return flags[pid]?.[channel] ?? false;
}

export function isMutual(vm: ViewModel, peer: string, channel: Channel): boolean {
  if (vm.selfId === null) return false;
  if (peer === vm.selfId) return true;
  return consentOf(vm.consent.flags, vm.selfId, channel) && consentOf(vm.consent.flags, peer, channel);
}

const SEQUENCED: ReadonlySet<string> = new Set([
  "PRESENCE",
  "BOARD_OP",
  "CONSENT_STATE",
  "LESSON_STATE",
  "QUIZ_JUDGE",
]);

export function reduce(vm: ViewModel, event: UiEvent): ViewModel {
  switch (event.kind) {
    case "connected":
      return { ...vm, connection: "open" };
    case "disconnected":
      return { ...vm, connection: "closed" };
    case "consentToggle":
      // Optimistic checkbox state only; data visibility waits for the server.
      return { ...vm, pendingConsent: { ...vm.pendingConsent, [event.channel]: event.share } };
    case "envelope":
      return reduceEnvelope(vm, event.env);
  }
}

function reduceEnvelope(vm: ViewModel, env: Envelope): ViewModel {
  let next = vm;
  if (SEQUENCED.has(env.type) && typeof env.seq === "number") {
    const gaps =
      next.seqHorizon > 0 && env.seq !== next.seqHorizon + 1
        ? [...next.seqGaps, `expected seq ${next.seqHorizon + 1}, got ${env.seq}`]
        : next.seqGaps;
    next = { ...next, seqHorizon: env.seq, seqGaps: gaps };
  }
  switch (env.type) {
    case "SNAPSHOT":
      return applySnapshot(next, env.payload as unknown as SnapshotPayload);
    case "PRESENCE":
      return applyPresence(next, env.payload);
    case "CONSENT_STATE":
      return applyConsentState(next, env.payload);
    case "SIGNAL_FRAME":
      return applyFrame(next, env.payload);
    case "BOARD_OP":
      return applyBoardOp(next, env);
    case "LESSON_STATE":
      return { ...next, lesson: { phase: String(env.payload.phase), unit: Number(env.payload.unit) } };
    case "QUIZ_JUDGE":
      return {
        ...next,
        quiz: {
          judgments: env.payload.judgments as boolean[],
          correct: Number(env.payload.correct),
          score: Number(env.payload.score),
        },
      };
    case "ADVISORY":
      return { ...next, advisory: env.payload as unknown as AdvisoryView };
    case "ERROR": {
      const error: ErrorView = {
        code: String(env.payload.code),
        detail: String(env.payload.detail ?? ""),
        re: env.payload.re as string | undefined,
      };
      let pending = next.pendingConsent;
      if (error.re === "CONSENT_SET") pending = {};
      return { ...next, errors: [...next.errors, error], pendingConsent: pending };
    }
    default:
      return next;
  }
}

function applySnapshot(vm: ViewModel, snapshot: SnapshotPayload): ViewModel {
  const cfg: DisplayConfig = snapshot.display ?? DEFAULT_DISPLAY;
  return {
    ...vm,
    connection: "open",
    selfId: snapshot.participant,
    roster: snapshot.roster,
    consent: snapshot.consent,
    boards: { ...snapshot.boards },
    lesson: { phase: snapshot.lesson.phase, unit: snapshot.lesson.unit },
    script: snapshot.lesson.script,
    quiz: snapshot.quiz,
    seqHorizon: snapshot.seq,
    displayConfig: cfg,
    buffers: { [snapshot.participant]: {} },
    // One's own display always exists, even before the first frame.
    displays: { [snapshot.participant]: neutralDisplay(cfg, snapshot.participant) },
  };
}

function applyPresence(vm: ViewModel, payload: Record<string, unknown>): ViewModel {
  const pid = String(payload.participant);
  if (payload.event === "join") {
    const entry: RosterEntry = {
      id: pid,
      name: String(payload.name),
      role: payload.role as RosterEntry["role"],
    };
    return { ...vm, roster: [...vm.roster.filter((r) => r.id !== pid), entry] };
  }
  const buffers = { ...vm.buffers };
  const displays = { ...vm.displays };
  delete buffers[pid];
  delete displays[pid];
  return { ...vm, roster: vm.roster.filter((r) => r.id !== pid), buffers, displays };
}

function applyConsentState(vm: ViewModel, payload: Record<string, unknown>): ViewModel {
  const channel = payload.channel as Channel;
  const participant = String(payload.participant);
  const consent = {
    version: Number(payload.version),
    flags: payload.flags as ConsentFlags,
  };
  let next: ViewModel = { ...vm, consent };
  if (vm.selfId !== null && participant === vm.selfId) {
    const pending = { ...next.pendingConsent };
    delete pending[channel];
    next = { ...next, pendingConsent: pending };
  }
  // Visibility may have been lost in either direction: prune immediately so
  // a revoked channel never lingers on screen.
  const buffers = { ...next.buffers };
  const displays = { ...next.displays };
  let changed = false;
  for (const peer of Object.keys(buffers)) {
    if (peer === next.selfId) continue;
    if (isMutual(next, peer, channel)) continue;
    const perChannel = buffers[peer];
    if (perChannel && perChannel[channel] && perChannel[channel]!.length > 0) {
      const pruned = { ...perChannel };
      delete pruned[channel];
      buffers[peer] = pruned;
      const at = displays[peer]?.t_ms ?? 0;
      displays[peer] = computeDisplay(pruned, next.displayConfig, at, peer);
      changed = true;
    }
  }
  return changed ? { ...next, buffers, displays } : next;
}

function applyFrame(vm: ViewModel, payload: Record<string, unknown>): ViewModel {
  const pid = String(payload.participant);
  const channel = payload.channel as Channel;
  const tMs = Number(payload.t_ms);
  const value = Number(payload.value);
  if (!CHANNELS.includes(channel) || !Number.isFinite(value)) return vm;

  if (pid !== vm.selfId && !isMutual(vm, pid, channel)) {
    return {
      ...vm,
      noPeekViolations: [
        ...vm.noPeekViolations,
        `frame from ${pid} on ${channel} without mutual consent (version ${vm.consent.version})`,
      ],
    };
  }

  const perChannel = { ...(vm.buffers[pid] ?? {}) };
  const horizon = tMs - vm.displayConfig.window_s * 1000.0;
  const samples = [...(perChannel[channel] ?? []), [tMs, value] as Sample].filter(([t]) => t >= horizon);
  perChannel[channel] = samples;
  const buffers = { ...vm.buffers, [pid]: perChannel };
  const displays = {
    ...vm.displays,
    [pid]: computeDisplay(perChannel, vm.displayConfig, tMs, pid),
  };
  return { ...vm, buffers, displays };
}

function findOpen(strokes: StrokeWire[], author: string, stroke: string): StrokeWire | undefined {
  for (let i = strokes.length - 1; i >= 0; i--) {
    const s = strokes[i];
    if (s.author === author && s.stroke === stroke && !s.closed) return s;
  }
  return undefined;
}

function applyBoardOp(vm: ViewModel, env: Envelope): ViewModel {
  const payload = env.payload;
  const boardId = String(payload.board);
  const board = vm.boards[boardId];
  if (!board || typeof env.seq !== "number" || env.seq <= board.last_seq) return vm;

  const strokes = board.strokes.map((s) => ({ ...s, points: [...s.points] }));
  const kind = String(payload.kind);
  const author = env.from;
  const strokeId = String(payload.stroke ?? "");
  let nextStrokes = strokes;
  if (kind === "CLEAR") {
    nextStrokes = [];
  } else if (kind === "STROKE_BEGIN") {
    const [x, y] = payload.point as [number, number];
    nextStrokes = [
      ...strokes,
      { stroke: strokeId, author, index: strokes.length, closed: false, points: [[x, y]] },
    ];
  } else if (kind === "STROKE_POINT") {
    const open = findOpen(nextStrokes, author, strokeId);
    if (open) {
      const [x, y] = payload.point as [number, number];
      open.points.push([x, y]);
    }
  } else if (kind === "STROKE_END") {
    const open = findOpen(nextStrokes, author, strokeId);
    if (open) open.closed = true;
  }
  const boards = {
    ...vm.boards,
    [boardId]: { ...board, last_seq: env.seq, strokes: nextStrokes },
  };
  return { ...vm, boards };
}

export function replayEnvelopes(sid: string, envelopes: Envelope[]): ViewModel {
  let vm = initialViewModel(sid);
  vm = reduce(vm, { kind: "connected" });
  for (const env of envelopes) {
    vm = reduce(vm, { kind: "envelope", env });
  }
  return vm;
}
