import { describe, expect, it } from "vitest";

import { DEFAULT_DISPLAY } from "../src/displayMath.js";
import type { Envelope } from "../src/protocol.js";
import type { ViewModel } from "../src/reducer.js";
import { initialViewModel, isMutual, reduce, replayEnvelopes } from "../src/reducer.js";

const SID = "s1";

function env(type: Envelope["type"], from: string, payload: Record<string, unknown>, seq?: number): Envelope {
  return { v: 1, type, sid: SID, from, payload, ...(seq !== undefined ? { seq } : {}) };
}

function snapshotEnv(self: string, seq: number, extras: Partial<Record<string, unknown>> = {}): Envelope {
  return env("SNAPSHOT", "server", {
    participant: self,
    seq,
    roster: [{ id: self, name: self, role: self === "t" ? "TEACHER" : "STUDENT" }],
    consent: { version: 0, flags: {} },
    boards: {
      teacher: { board: "teacher", last_seq: 0, strokes: [] },
      student: { board: "student", last_seq: 0, strokes: [] },
    },
    lesson: { phase: "INTRO", unit: 0, script: { kanji: [] } },
    quiz: null,
    display: DEFAULT_DISPLAY,
    signal_rates: { BVP: 32, RESP: 8, SC: 4 },
    scr_threshold: 6,
    ...extras,
  });
}

function consentState(
  participant: string,
  channel: string,
  share: boolean,
  version: number,
  flags: Record<string, Record<string, boolean>>,
  seq: number,
): Envelope {
  return env("CONSENT_STATE", participant, { participant, channel, share, version, flags }, seq);
}

function frame(from: string, channel: string, seq: number, tMs: number, value: number): Envelope {
  return env("SIGNAL_FRAME", from, { participant: from, channel, seq, t_ms: tMs, value });
}

function joined(self: string): ViewModel {
  let vm = initialViewModel(SID);
  vm = reduce(vm, { kind: "connected" });
  vm = reduce(vm, { kind: "envelope", env: snapshotEnv(self, 1) });
  vm = reduce(vm, {
    kind: "envelope",
    env: env("PRESENCE", "s", { participant: "s", event: "join", name: "S", role: "STUDENT" }, 2),
  });
  return vm;
}

describe("snapshot and presence", () => {
  it("initializes from the snapshot with own display present", () => {
    const vm = joined("t");
    expect(vm.selfId).toBe("t");
    expect(vm.roster.map((r) => r.id).sort()).toEqual(["s", "t"]);
    expect(vm.displays["t"]).toBeDefined();
    expect(vm.displays["t"].sweat_density).toBeCloseTo(4, 12);
    expect(vm.displays["s"]).toBeUndefined();
  });

  it("drops a departing peer's buffers and displays", () => {
    let vm = joined("t");
    const flags = { t: { SC: true }, s: { SC: true } };
    vm = reduce(vm, { kind: "envelope", env: consentState("t", "SC", true, 1, { t: { SC: true } }, 3) });
    vm = reduce(vm, { kind: "envelope", env: consentState("s", "SC", true, 2, flags, 4) });
    vm = reduce(vm, { kind: "envelope", env: frame("s", "SC", 1, 100, 2.0) });
    expect(vm.displays["s"]).toBeDefined();
    vm = reduce(vm, { kind: "envelope", env: env("PRESENCE", "s", { participant: "s", event: "leave" }, 5) });
    expect(vm.displays["s"]).toBeUndefined();
    expect(vm.buffers["s"]).toBeUndefined();
  });
});

describe("no-peek", () => {
  it("never holds a peer's display without mutual consent", () => {
    // Peer shares, self never does: nothing of the peer may materialize.
    const envelopes = [
      snapshotEnv("t", 1),
      env("PRESENCE", "s", { participant: "s", event: "join", name: "S", role: "STUDENT" }, 2),
      consentState("s", "SC", true, 1, { s: { SC: true } }, 3),
      frame("s", "SC", 1, 100, 2.5),
      frame("s", "SC", 2, 350, 2.6),
      frame("s", "BVP", 1, 400, 0.8),
    ];
    const vm = replayEnvelopes(SID, envelopes);
    expect(vm.displays["s"]).toBeUndefined();
    expect(vm.buffers["s"]).toBeUndefined();
    expect(vm.noPeekViolations.length).toBe(3);
  });

  it("admits frames only while the channel is mutual", () => {
    let vm = joined("t");
    vm = reduce(vm, { kind: "envelope", env: consentState("t", "SC", true, 1, { t: { SC: true } }, 3) });
    vm = reduce(vm, {
      kind: "envelope",
      env: consentState("s", "SC", true, 2, { t: { SC: true }, s: { SC: true } }, 4),
    });
    vm = reduce(vm, { kind: "envelope", env: frame("s", "SC", 1, 100, 2.0) });
    vm = reduce(vm, { kind: "envelope", env: frame("s", "SC", 2, 350, 2.4) });
    expect(vm.displays["s"]).toBeDefined();
    expect(vm.noPeekViolations).toEqual([]);
    expect(isMutual(vm, "s", "SC")).toBe(true);
  });

  it("prunes a channel immediately on revocation, both directions", () => {
    let vm = joined("t");
    vm = reduce(vm, { kind: "envelope", env: consentState("t", "SC", true, 1, { t: { SC: true } }, 3) });
    vm = reduce(vm, {
      kind: "envelope",
      env: consentState("s", "SC", true, 2, { t: { SC: true }, s: { SC: true } }, 4),
    });
    vm = reduce(vm, { kind: "envelope", env: frame("s", "SC", 1, 100, 2.0) });
    vm = reduce(vm, { kind: "envelope", env: frame("s", "SC", 2, 350, 2.9) });
    const active = vm.displays["s"].sweat_density;
    expect(active).not.toBeCloseTo(4, 6); // two distinct samples: not neutral

    // The PEER revokes: their channel vanishes from our view.
    vm = reduce(vm, {
      kind: "envelope",
      env: consentState("s", "SC", false, 3, { t: { SC: true }, s: { SC: false } }, 5),
    });
    expect(vm.buffers["s"]?.SC).toBeUndefined();
    expect(vm.displays["s"].sweat_density).toBeCloseTo(4, 12); // neutral

    // Re-establish, then WE revoke: peer data must disappear as well.
    vm = reduce(vm, {
      kind: "envelope",
      env: consentState("s", "SC", true, 4, { t: { SC: true }, s: { SC: true } }, 6),
    });
    vm = reduce(vm, { kind: "envelope", env: frame("s", "SC", 3, 600, 3.2) });
    vm = reduce(vm, { kind: "envelope", env: frame("s", "SC", 4, 850, 2.1) });
    expect(vm.buffers["s"]?.SC?.length).toBe(2);
    vm = reduce(vm, {
      kind: "envelope",
      env: consentState("t", "SC", false, 5, { t: { SC: false }, s: { SC: true } }, 7),
    });
    expect(vm.buffers["s"]?.SC).toBeUndefined();
    expect(vm.displays["s"].sweat_density).toBeCloseTo(4, 12);
  });
});

describe("boards", () => {
  function beginOp(from: string, stroke: string, seq: number, point: [number, number]): Envelope {
    return env("BOARD_OP", from, { kind: "STROKE_BEGIN", board: "teacher", stroke, point, t_ms: 0 }, seq);
  }

  it("folds ops in server order; stroke index = BEGIN order", () => {
    let vm = joined("t");
    vm = reduce(vm, { kind: "envelope", env: beginOp("s", "s-1", 3, [0.1, 0.1]) });
    vm = reduce(vm, { kind: "envelope", env: beginOp("t", "t-1", 4, [0.2, 0.2]) });
    vm = reduce(vm, {
      kind: "envelope",
      env: env("BOARD_OP", "s", { kind: "STROKE_POINT", board: "teacher", stroke: "s-1", point: [0.15, 0.15], t_ms: 10 }, 5),
    });
    vm = reduce(vm, {
      kind: "envelope",
      env: env("BOARD_OP", "s", { kind: "STROKE_END", board: "teacher", stroke: "s-1", t_ms: 20 }, 6),
    });
    const strokes = vm.boards["teacher"].strokes;
    expect(strokes.map((s) => s.stroke)).toEqual(["s-1", "t-1"]);
    expect(strokes.map((s) => s.index)).toEqual([0, 1]);
    expect(strokes[0].closed).toBe(true);
    expect(strokes[0].points.length).toBe(2);
  });

  it("ignores replayed or stale ops", () => {
    let vm = joined("t");
    vm = reduce(vm, { kind: "envelope", env: beginOp("t", "t-1", 3, [0.2, 0.2]) });
    const before = vm.boards["teacher"].strokes.length;
    vm = reduce(vm, { kind: "envelope", env: beginOp("t", "t-9", 3, [0.4, 0.4]) });
    expect(vm.boards["teacher"].strokes.length).toBe(before);
  });

  it("CLEAR empties the board", () => {
    let vm = joined("t");
    vm = reduce(vm, { kind: "envelope", env: beginOp("t", "t-1", 3, [0.2, 0.2]) });
    vm = reduce(vm, { kind: "envelope", env: env("BOARD_OP", "t", { kind: "CLEAR", board: "teacher", t_ms: 30 }, 4) });
    expect(vm.boards["teacher"].strokes).toEqual([]);
  });
});

describe("consent toggling and errors", () => {
  it("tracks optimistic toggle state until confirmation", () => {
    let vm = joined("t");
    vm = reduce(vm, { kind: "consentToggle", channel: "SC", share: true });
    expect(vm.pendingConsent.SC).toBe(true);
    vm = reduce(vm, { kind: "envelope", env: consentState("t", "SC", true, 1, { t: { SC: true } }, 3) });
    expect(vm.pendingConsent.SC).toBeUndefined();
    expect(vm.consent.flags.t.SC).toBe(true);
  });

  it("reverts the pending toggle on an ERROR reply", () => {
    let vm = joined("t");
    vm = reduce(vm, { kind: "consentToggle", channel: "SC", share: true });
    vm = reduce(vm, {
      kind: "envelope",
      env: env("ERROR", "server", { code: "schema", detail: "nope", re: "CONSENT_SET" }),
    });
    expect(vm.pendingConsent.SC).toBeUndefined();
    expect(vm.errors[0].code).toBe("schema");
  });
});

describe("lesson, quiz, advisory, sequencing", () => {
  it("follows lesson state and quiz results", () => {
    let vm = joined("t");
    vm = reduce(vm, { kind: "envelope", env: env("LESSON_STATE", "t", { phase: "TEACH", unit: 1 }, 3) });
    expect(vm.lesson).toEqual({ phase: "TEACH", unit: 1 });
    vm = reduce(vm, {
      kind: "envelope",
      env: env("QUIZ_JUDGE", "t", { judgments: [true, true, false, true, true], correct: 4, score: 0.8 }, 4),
    });
    expect(vm.quiz?.correct).toBe(4);
  });

  it("records advisory banners", () => {
    let vm = joined("t");
    vm = reduce(vm, {
      kind: "envelope",
      env: env("ADVISORY", "server", { participant: "s", advisory: "RELAX", scr_rate: 8.2, threshold: 6 }),
    });
    expect(vm.advisory?.advisory).toBe("RELAX");
  });

  it("flags sequence gaps", () => {
    let vm = joined("t");
    vm = reduce(vm, { kind: "envelope", env: env("LESSON_STATE", "t", { phase: "TEACH", unit: 1 }, 7) });
    expect(vm.seqGaps.length).toBe(1);
  });

  it("replay of the same log yields the same view-model", () => {
    const envelopes = [
      snapshotEnv("t", 1),
      env("PRESENCE", "s", { participant: "s", event: "join", name: "S", role: "STUDENT" }, 2),
      consentState("t", "SC", true, 1, { t: { SC: true } }, 3),
      consentState("s", "SC", true, 2, { t: { SC: true }, s: { SC: true } }, 4),
      frame("s", "SC", 1, 100, 2.0),
      env("LESSON_STATE", "t", { phase: "TEACH", unit: 1 }, 5),
    ];
    const a = replayEnvelopes(SID, envelopes);
    const b = replayEnvelopes(SID, envelopes);
    expect(JSON.stringify(a)).toBe(JSON.stringify(b));
  });
});
