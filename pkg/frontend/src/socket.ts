// Transport-agnostic session client: one duplex text stream in, envelopes
// out, all state changes through the reducer. The browser uses the
// websocket transport; tests inject anything that can carry lines.

import type { BoardOpPayload } from "./strokes.js";
import type { Channel, Envelope, Role } from "./protocol.js";
import { envelope, parseEnvelope } from "./protocol.js";
import type { UiEvent, ViewModel } from "./reducer.js";
import { initialViewModel, reduce } from "./reducer.js";

export interface Transport {
  send(text: string): void;
  close(): void;
}

export interface TransportEvents {
  onOpen(): void;
  onMessage(text: string): void;
  onClose(): void;
}

export type TransportFactory = (events: TransportEvents) => Transport;

export function webSocketTransport(url: string): TransportFactory {
  return (events) => {
    const ws = new WebSocket(url);
    ws.onopen = () => events.onOpen();
    ws.onmessage = (msg) => events.onMessage(String(msg.data));
    ws.onclose = () => events.onClose();
    ws.onerror = () => events.onClose();
    return {
      send: (text) => ws.send(text),
      close: () => ws.close(),
    };
  };
}

export class SessionClient {
  vm: ViewModel;
  readonly sid: string;
  private readonly name: string;
  private readonly role: Role;
  private readonly requestedPid?: string;
  private transport: Transport | null = null;
  private listeners: Array<(vm: ViewModel) => void> = [];
  private frameSeq: Partial<Record<Channel, number>> = {};
  private strokeCounter = 0;

  constructor(sid: string, name: string, role: Role, requestedPid?: string) {
    this.sid = sid;
    this.name = name;
    this.role = role;
    this.requestedPid = requestedPid;
    this.vm = initialViewModel(sid);
  }

  connect(factory: TransportFactory): void {
    this.transport = factory({
      onOpen: () => {
        this.dispatch({ kind: "connected" });
        const payload: Record<string, unknown> = { name: this.name, role: this.role };
        if (this.requestedPid) payload.participant = this.requestedPid;
        this.sendEnvelope(envelope("JOIN", this.sid, this.requestedPid ?? "", payload));
      },
      onMessage: (text) => {
        let env: Envelope;
        try {
          env = parseEnvelope(text);
        } catch {
          return;
        }
        this.dispatch({ kind: "envelope", env });
      },
      onClose: () => this.dispatch({ kind: "disconnected" }),
    });
  }

  close(): void {
    this.transport?.close();
  }

  onChange(listener: (vm: ViewModel) => void): void {
    this.listeners.push(listener);
  }

  dispatch(event: UiEvent): void {
    this.vm = reduce(this.vm, event);
    for (const listener of this.listeners) listener(this.vm);
  }

  get selfId(): string {
    return this.vm.selfId ?? this.requestedPid ?? "";
  }

  get connected(): boolean {
    return this.vm.connection === "open" && this.vm.selfId !== null;
  }

  private sendEnvelope(env: Envelope): void {
    this.transport?.send(JSON.stringify(env));
  }

  setConsent(channel: Channel, share: boolean): void {
    if (!this.connected) return;
    this.dispatch({ kind: "consentToggle", channel, share });
    this.sendEnvelope(
      envelope("CONSENT_SET", this.sid, this.selfId, { participant: this.selfId, channel, share }),
    );
  }

  sendBoardOp(payload: BoardOpPayload): void {
    if (!this.connected) return;
    this.sendEnvelope(envelope("BOARD_OP", this.sid, this.selfId, { ...payload }));
  }

  sendFrame(channel: Channel, tMs: number, value: number): void {
    if (!this.connected) return;
    const seq = (this.frameSeq[channel] ?? 0) + 1;
    this.frameSeq[channel] = seq;
    this.sendEnvelope(
      envelope("SIGNAL_FRAME", this.sid, this.selfId, {
        participant: this.selfId,
        channel,
        seq,
        t_ms: Math.trunc(tMs),
        value,
      }),
    );
  }

  advanceLesson(): void {
    if (!this.connected) return;
    this.sendEnvelope(envelope("LESSON_ADVANCE", this.sid, this.selfId, {}));
  }

  judgeQuiz(judgments: boolean[]): void {
    if (!this.connected) return;
    this.sendEnvelope(envelope("QUIZ_JUDGE", this.sid, this.selfId, { judgments }));
  }

  ping(): void {
    if (!this.connected) return;
    this.sendEnvelope(envelope("PING", this.sid, this.selfId, { t: Date.now() }));
  }

  nextStrokeId(): string {
    this.strokeCounter += 1;
    return `${this.selfId}-s${this.strokeCounter}`;
  }
}
