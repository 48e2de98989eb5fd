// Wire protocol types shared with the server. One JSON envelope per
// websocket text frame (or newline-delimited line on the raw binding).

export const PROTOCOL_VERSION = 1;

export type Channel = "BVP" | "RESP" | "SC";
export const CHANNELS: Channel[] = ["BVP", "RESP", "SC"];

export type Role = "TEACHER" | "STUDENT" | "OBSERVER";

export type MessageType =
  | "JOIN"
  | "SNAPSHOT"
  | "PRESENCE"
  | "SIGNAL_FRAME"
  | "CONSENT_SET"
  | "CONSENT_STATE"
  | "BOARD_OP"
  | "LESSON_ADVANCE"
  | "LESSON_STATE"
  | "QUIZ_JUDGE"
  | "ADVISORY"
  | "ERROR"
  | "PING"
  | "PONG";

export interface Envelope {
  v: number;
  type: MessageType;
  sid: string;
  from: string;
  seq?: number;
  t_server_ms?: number;
  payload: Record<string, unknown>;
}

export interface RosterEntry {
  id: string;
  name: string;
  role: Role;
}

export type ConsentFlags = Record<string, Partial<Record<Channel, boolean>>>;

export interface StrokeWire {
  stroke: string;
  author: string;
  index: number;
  closed: boolean;
  points: [number, number][];
}

export interface BoardWire {
  board: string;
  last_seq: number;
  strokes: StrokeWire[];
}

export interface KanjiItem {
  label: string;
  difficulty: number;
  strokes: number;
}

export interface LessonScript {
  kanji: KanjiItem[];
  intro_notes?: string;
}

export interface SnapshotPayload {
  participant: string;
  seq: number;
  roster: RosterEntry[];
  consent: { version: number; flags: ConsentFlags };
  boards: Record<string, BoardWire>;
  lesson: { phase: string; unit: number; script: LessonScript };
  quiz: { judgments: boolean[]; correct: number; score: number } | null;
  display: {
    r_min: number;
    r_max: number;
    h_min: number;
    h_max: number;
    d_max: number;
    window_s: number;
  };
  signal_rates: Record<Channel, number>;
  scr_threshold: number;
}

export function envelope(
  type: MessageType,
  sid: string,
  from: string,
  payload: Record<string, unknown>,
): Envelope {
  return { v: PROTOCOL_VERSION, type, sid, from, payload };
}

export function parseEnvelope(text: string): Envelope {
  const obj = JSON.parse(text) as Envelope;
  if (obj.v !== PROTOCOL_VERSION || typeof obj.type !== "string") {
    throw new Error(`bad envelope: ${text.slice(0, 120)}`);
  }
  return obj;
}
