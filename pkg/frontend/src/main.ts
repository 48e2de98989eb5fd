// Browser entry point: joins the session from URL parameters and wires the
// canvases, consent toggles, lesson panel and ambient displays to the
// reducer-backed client. Boards sit center stage; the ambient displays live
// at the periphery, small and unlabeled.

import { SweatField, mulberry32, renderAmbient } from "./ambient.js";
import type { Channel } from "./protocol.js";
import { CHANNELS } from "./protocol.js";
import type { ViewModel } from "./reducer.js";
import { SessionClient, webSocketTransport } from "./socket.js";
import { PendingEcho, StrokeCapture } from "./strokes.js";

const params = new URLSearchParams(location.search);
const sid = params.get("sid") ?? "classroom";
const name = params.get("name") ?? "Guest";
const role = (params.get("role") ?? "STUDENT").toUpperCase() as "TEACHER" | "STUDENT" | "OBSERVER";
const pid = params.get("participant") ?? undefined;

const client = new SessionClient(sid, name, role, pid);

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;
const banner = $("banner");
const rosterEl = $("roster");
const phaseEl = $("phase");
const kanjiEl = $("kanji");
const advisoryEl = $("advisory");
const quizEl = $("quiz");
const boardsEl = $("boards");
const ambientEl = $("ambient");
const advanceBtn = $("advance") as HTMLButtonElement;

const boardCanvases = new Map<string, HTMLCanvasElement>();
const ambientCanvases = new Map<string, HTMLCanvasElement>();
const sweatFields = new Map<string, SweatField>();
const captures = new Map<string, StrokeCapture>();
const echoes = new Map<string, PendingEcho>();

function canWrite(boardId: string): boolean {
  if (role === "TEACHER") return true;
  if (role === "STUDENT") return boardId === "student";
  return false;
}

function ensureBoardCanvas(boardId: string): HTMLCanvasElement {
  let canvas = boardCanvases.get(boardId);
  if (canvas) return canvas;
  const wrap = document.createElement("div");
  wrap.className = "board-wrap";
  const label = document.createElement("div");
  label.className = "board-label";
  label.textContent = boardId;
  canvas = document.createElement("canvas");
  canvas.width = 460;
  canvas.height = 400;
  canvas.className = "board";
  wrap.append(label, canvas);
  boardsEl.append(wrap);
  boardCanvases.set(boardId, canvas);

  if (canWrite(boardId)) {
    const echo = new PendingEcho();
    echoes.set(boardId, echo);
    const capture = new StrokeCapture({
      boardId,
      send: (payload) => {
        echo.record(payload);
        client.sendBoardOp(payload);
        drawBoard(boardId, client.vm);
      },
      isConnected: () => client.connected,
      now: () => performance.now(),
      makeStrokeId: () => client.nextStrokeId(),
      onDroppedWhileDisconnected: () => showBanner("disconnected - drawing paused"),
    });
    captures.set(boardId, capture);
    const norm = (ev: PointerEvent): [number, number] => {
      const rect = canvas!.getBoundingClientRect();
      return [(ev.clientX - rect.left) / rect.width, (ev.clientY - rect.top) / rect.height];
    };
    canvas.addEventListener("pointerdown", (ev) => capture.pointerDown(...norm(ev)));
    canvas.addEventListener("pointermove", (ev) => capture.pointerMove(...norm(ev)));
    canvas.addEventListener("pointerup", () => capture.pointerUp());
    canvas.addEventListener("pointerleave", () => capture.pointerLeave());
  }
  return canvas;
}

function drawBoard(boardId: string, vm: ViewModel): void {
  const canvas = ensureBoardCanvas(boardId);
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.lineWidth = 2.5;
  ctx.lineCap = "round";
  ctx.lineJoin = "round";
  const board = vm.boards[boardId];
  if (!board) return;
  const echo = echoes.get(boardId);
  if (echo && vm.selfId) echo.reconcile(board, vm.selfId);

  const paint = (points: [number, number][], style: string) => {
    ctx.beginPath();
    ctx.strokeStyle = style;
    points.forEach(([x, y], i) => {
      const px = x * canvas!.width;
      const py = y * canvas!.height;
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    if (points.length === 1) {
      const [x, y] = points[0];
      ctx.arc(x * canvas!.width, y * canvas!.height, 1.2, 0, Math.PI * 2);
    }
    ctx.stroke();
  };

  for (const stroke of board.strokes) {
    paint(stroke.points, stroke.author === vm.selfId ? "#1b1b1b" : "#444488");
  }
  // In-flight local echo on top, until the server's copy lands.
  for (const stroke of echo?.overlay() ?? []) {
    paint(stroke.points, "#8a8a8a");
  }
}

function ensureAmbientCanvas(pid2: string, label: string): HTMLCanvasElement {
  let canvas = ambientCanvases.get(pid2);
  if (canvas) return canvas;
  const wrap = document.createElement("div");
  wrap.className = "ambient-wrap";
  const caption = document.createElement("div");
  caption.className = "ambient-label";
  caption.textContent = label;
  canvas = document.createElement("canvas");
  canvas.width = 220;
  canvas.height = 90;
  canvas.className = "ambient";
  wrap.append(caption, canvas);
  ambientEl.append(wrap);
  ambientCanvases.set(pid2, canvas);
  sweatFields.set(pid2, new SweatField(mulberry32(Date.now() & 0xffff)));
  return canvas;
}

function showBanner(text: string): void {
  banner.textContent = text;
  banner.classList.remove("hidden");
}

function hideBanner(): void {
  banner.classList.add("hidden");
}

function renderConsent(vm: ViewModel): void {
  for (const ch of CHANNELS) {
    const box = $(`consent-${ch}`) as HTMLInputElement;
    const confirmed = vm.selfId ? vm.consent.flags[vm.selfId]?.[ch] ?? false : false;
    const pending = vm.pendingConsent[ch];
    box.checked = pending ?? confirmed;
    box.disabled = vm.connection !== "open";
  }
}

function renderLesson(vm: ViewModel): void {
  phaseEl.textContent = vm.lesson.phase === "TEACH" ? `TEACH ${vm.lesson.unit}/5` : vm.lesson.phase;
  if (vm.lesson.phase === "TEACH" && vm.script) {
    const item = vm.script.kanji[vm.lesson.unit - 1];
    kanjiEl.textContent = item ? item.label : "";
  } else if (vm.lesson.phase === "QUIZ") {
    kanjiEl.textContent = "quiz";
  } else if (vm.quiz) {
    kanjiEl.textContent = `score ${vm.quiz.correct}/5`;
  } else {
    kanjiEl.textContent = "";
  }
  advanceBtn.disabled = role !== "TEACHER" || vm.lesson.phase === "DONE" || vm.connection !== "open";
  advanceBtn.classList.toggle("hidden", role !== "TEACHER");

  if (role === "TEACHER" && vm.advisory) {
    advisoryEl.textContent = `${vm.advisory.advisory} (${vm.advisory.scr_rate.toFixed(1)}/min)`;
    advisoryEl.className = vm.advisory.advisory === "RELAX" ? "advisory relax" : "advisory ok";
  } else {
    advisoryEl.textContent = "";
    advisoryEl.className = "advisory";
  }

  const judging = role === "TEACHER" && (vm.lesson.phase === "QUIZ" || vm.lesson.phase === "DONE");
  quizEl.classList.toggle("hidden", !judging);
}

function renderRoster(vm: ViewModel): void {
  rosterEl.innerHTML = "";
  for (const entry of vm.roster) {
    const li = document.createElement("li");
    const shared = CHANNELS.filter((ch) => vm.consent.flags[entry.id]?.[ch]).join(" ");
    li.textContent = `${entry.name} [${entry.role.toLowerCase()}]${shared ? ` shares: ${shared}` : ""}`;
    if (entry.id === vm.selfId) li.classList.add("self");
    rosterEl.append(li);
  }
}

client.onChange((vm) => {
  if (vm.connection === "closed") showBanner("connection lost");
  else if (vm.connection === "open") hideBanner();
  renderConsent(vm);
  renderLesson(vm);
  renderRoster(vm);
  for (const boardId of Object.keys(vm.boards)) drawBoard(boardId, vm);
  const latest = vm.errors[vm.errors.length - 1];
  if (latest && latest.code !== "not-teacher") showBanner(`${latest.code}: ${latest.detail}`);
});

// Ambient rendering loop: one small canvas per participant, self first.
let lastFrameMs = performance.now();
function ambientLoop(): void {
  const vm = client.vm;
  const now = performance.now();
  const dt = Math.min(100, now - lastFrameMs);
  lastFrameMs = now;
  if (vm.selfId) {
    const ordered = [vm.selfId, ...vm.roster.map((r) => r.id).filter((id) => id !== vm.selfId)];
    for (const pid2 of ordered) {
      const entry = vm.roster.find((r) => r.id === pid2);
      const label = pid2 === vm.selfId ? "you" : entry?.name ?? pid2;
      const canvas = ensureAmbientCanvas(pid2, label);
      const ctx = canvas.getContext("2d")!;
      const displayed = vm.displays[pid2];
      if (displayed) {
        renderAmbient(ctx, displayed, vm.displayConfig, sweatFields.get(pid2)!, now, dt, {
          x: 0,
          y: 0,
          w: canvas.width,
          h: canvas.height,
        });
      } else {
        ctx.clearRect(0, 0, canvas.width, canvas.height);
        ctx.fillStyle = "#999";
        ctx.font = "12px sans-serif";
        ctx.fillText("not shared", 8, canvas.height / 2);
      }
    }
  }
  requestAnimationFrame(ambientLoop);
}
requestAnimationFrame(ambientLoop);

// Controls
for (const ch of CHANNELS) {
  const box = $(`consent-${ch}`) as HTMLInputElement;
  box.addEventListener("change", () => client.setConsent(ch, box.checked));
}
advanceBtn.addEventListener("click", () => client.advanceLesson());
($("judge") as HTMLButtonElement).addEventListener("click", () => {
  const judgments = [1, 2, 3, 4, 5].map((i) => ($(`j${i}`) as HTMLInputElement).checked);
  client.judgeQuiz(judgments);
});

// Without sensors attached, the browser synthesizes its own outgoing
// signals; what peers may see of them is still decided by the server.
function startSyntheticSignals(): void {
  const t0 = performance.now();
  const rng = mulberry32((Date.now() ^ 0x5bd1) & 0xffffffff);
  const hr = 58 + rng() * 30;
  const breaths = 10 + rng() * 8;
  const tonic = 1.8 + rng() * 1.5;
  let nextScr = 5000 + rng() * 15000;
  let scrLevel = 0;
  const send = (channel: Channel, rateHz: number, value: (tS: number) => number) => {
    setInterval(() => {
      const tMs = performance.now() - t0;
      client.sendFrame(channel, tMs, value(tMs / 1000));
    }, 1000 / rateHz);
  };
  send("BVP", 16, (t) => {
    const phase = (t * hr / 60) % 1;
    const syst = phase < 0.3 ? Math.sin((Math.PI * phase) / 0.3) : 0;
    const dicr = phase >= 0.22 && phase <= 0.34 ? 0.2 * Math.sin((Math.PI * (phase - 0.22)) / 0.12) : 0;
    return syst + dicr;
  });
  send("RESP", 8, (t) => 0.5 - 0.5 * Math.cos((2 * Math.PI * t * breaths) / 60));
  send("SC", 4, (t) => {
    const tMs = t * 1000;
    if (tMs > nextScr) {
      scrLevel += 0.3 + rng() * 0.4;
      nextScr = tMs + 8000 + rng() * 20000;
    }
    scrLevel *= 0.97;
    return tonic + scrLevel;
  });
}

const url = new URL(location.href);
url.protocol = url.protocol === "https:" ? "wss:" : "ws:";
url.pathname = "/ws";
url.search = "";
client.connect(webSocketTransport(url.toString()));
const joined = setInterval(() => {
  if (client.connected) {
    clearInterval(joined);
    if (role !== "OBSERVER") startSyntheticSignals();
  }
}, 200);
