"""Deterministic scenario simulation on a virtual clock.

The simulator wires synthetic clients to a SessionHub through an in-process
loopback: every message is handled synchronously in virtual-time order, so
a scripted lesson runs in milliseconds and a fixed (scenario, seed) pair
yields byte-identical traces on every run and platform.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

from . import protocol
from .config import ServerConfig
from .errors import PulseboardError, ScenarioError
from .lesson import Role
from .protocol import Envelope, canonical_dumps
from .server import SessionHub, SessionReplica
from .signals import SignalChannel, SignalTrace, gen_bvp, gen_resp, gen_sc

ACTION_KINDS = ("consent", "advance", "stroke", "clear", "quiz", "leave")

# Spacing of scripted stroke points; ~25 points/s, well under the 60/s cap.
STROKE_POINT_SPACING_MS = 40

CHANNEL_ORDER = (SignalChannel.BVP, SignalChannel.RESP, SignalChannel.SC)


def derive_seed(seed: int, participant_index: int, channel_index: int) -> int:
    """Stable arithmetic seed derivation; no platform-dependent hashing."""
    return (seed * 2_654_435_761 + participant_index * 40_503 + channel_index * 97 + 1) % (2**31)


@dataclass
class ParticipantSpec:
    pid: str
    name: str
    role: Role
    signals: dict = field(default_factory=dict)  # {"bvp": {...}, "resp": {...}, "sc": {...}}

    @classmethod
    def from_wire(cls, data: dict) -> "ParticipantSpec":
        try:
            return cls(
                pid=str(data["id"]),
                name=str(data.get("name", data["id"])),
                role=Role(data["role"]),
                signals=dict(data.get("signals", {})),
            )
        except (KeyError, ValueError) as exc:
            raise ScenarioError(f"bad participant spec: {exc}") from exc


@dataclass
class Action:
    at_s: float
    actor: str
    kind: str
    params: dict = field(default_factory=dict)

    @classmethod
    def from_wire(cls, data: dict) -> "Action":
        try:
            kind = str(data["action"])
            if kind not in ACTION_KINDS:
                raise ScenarioError(f"unknown action {kind!r}")
            params = {k: v for k, v in data.items() if k not in ("at_s", "actor", "action")}
            return cls(at_s=float(data["at_s"]), actor=str(data["actor"]), kind=kind, params=params)
        except KeyError as exc:
            raise ScenarioError(f"action missing {exc}") from exc


@dataclass
class Scenario:
    name: str
    sid: str
    seed: int
    duration_s: float
    participants: list[ParticipantSpec]
    actions: list[Action]
    config: ServerConfig = field(default_factory=ServerConfig)

    def validate(self) -> None:
        if self.duration_s <= 0:
            raise ScenarioError("duration_s must be positive")
        if not self.participants:
            raise ScenarioError("scenario needs at least one participant")
        pids = [p.pid for p in self.participants]
        if len(set(pids)) != len(pids):
            raise ScenarioError("duplicate participant ids")
        teachers = [p for p in self.participants if p.role is Role.TEACHER]
        if len(teachers) != 1:
            raise ScenarioError("scenario needs exactly one TEACHER")
        known = set(pids)
        last_t = -1.0
        for action in self.actions:
            if action.at_s < last_t:
                raise ScenarioError("actions must be sorted by time")
            last_t = action.at_s
            if not 0 <= action.at_s <= self.duration_s:
                raise ScenarioError(f"action at {action.at_s}s outside [0, {self.duration_s}]")
            if action.actor not in known:
                raise ScenarioError(f"action actor {action.actor!r} not in roster")
            if action.kind == "consent":
                if action.params.get("channel") not in ("BVP", "RESP", "SC"):
                    raise ScenarioError(f"bad consent channel {action.params.get('channel')!r}")
                if not isinstance(action.params.get("share"), bool):
                    raise ScenarioError("consent share must be a boolean")
            elif action.kind in ("stroke", "clear"):
                if not action.params.get("board"):
                    raise ScenarioError(f"{action.kind} action needs a board")
                if action.kind == "stroke":
                    points = action.params.get("points")
                    if not points or not all(
                        isinstance(p, (list, tuple)) and len(p) == 2 and all(0 <= float(c) <= 1 for c in p)
                        for p in points
                    ):
                        raise ScenarioError("stroke points must be a non-empty list inside [0,1]^2")
            elif action.kind == "quiz":
                judgments = action.params.get("judgments")
                if not isinstance(judgments, list) or len(judgments) != 5 or not all(
                    isinstance(j, bool) for j in judgments
                ):
                    raise ScenarioError("quiz judgments must be exactly 5 booleans")

    @classmethod
    def from_wire(cls, data: dict) -> "Scenario":
        try:
            scenario = cls(
                name=str(data.get("name", "scenario")),
                sid=str(data.get("sid", "session")),
                seed=int(data.get("seed", 0)),
                duration_s=float(data["duration_s"]),
                participants=[ParticipantSpec.from_wire(p) for p in data["participants"]],
                actions=[Action.from_wire(a) for a in data.get("actions", [])],
                config=ServerConfig.from_wire(data.get("config", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad scenario: {exc}") from exc
        scenario.validate()
        return scenario


def load_scenario(name_or_path: str, seed: int | None = None) -> Scenario:
    """Load a scenario from a file path or from the bundled set by name."""
    bundled = resources.files("pulseboard.data").joinpath(f"scenario_{name_or_path}.json")
    try:
        raw = bundled.read_text("utf-8")
    except (FileNotFoundError, ModuleNotFoundError):
        raw = None
    if raw is None:
        try:
            with open(name_or_path, "r", encoding="utf-8") as fh:
                raw = fh.read()
        except OSError as exc:
            raise ScenarioError(f"no bundled scenario or readable file {name_or_path!r}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
    scenario = Scenario.from_wire(data)
    if seed is not None:
        scenario.seed = seed
    return scenario


class SimClient:
    """Synthetic participant: folds received envelopes into a replica."""

    def __init__(self, pid: str, sid: str, config: ServerConfig) -> None:
        self.pid = pid
        self.sid = sid
        self.replica = SessionReplica(sid, config)
        self.active = False
        self.horizon: int | None = None
        self.gap_violations: list[str] = []
        self.errors: list[dict] = []
        self.advisories: list[dict] = []
        self.frames_received: dict[tuple[str, str], int] = {}
        self.frame_seq: dict[SignalChannel, int] = {}
        self.stroke_counter = 0

    def next_frame_seq(self, channel: SignalChannel) -> int:
        self.frame_seq[channel] = self.frame_seq.get(channel, 0) + 1
        return self.frame_seq[channel]

    def next_stroke_id(self) -> str:
        self.stroke_counter += 1
        return f"{self.pid}-s{self.stroke_counter}"

    def deliver(self, env: Envelope) -> None:
        if env.type == protocol.SNAPSHOT:
            self.replica.load_snapshot(env.payload)
            self.horizon = self.replica.seq
            self.active = True
            return
        if env.type in protocol.SEQUENCED_TYPES:
            expected = (self.horizon or 0) + 1 if self.horizon is not None else None
            if expected is not None and env.seq != expected:
                self.gap_violations.append(f"{self.pid}: expected seq {expected}, got {env.seq}")
            self.horizon = env.seq
            self.replica.apply(env)
            return
        if env.type == protocol.SIGNAL_FRAME:
            key = (env.payload["participant"], env.payload["channel"])
            self.frames_received[key] = self.frames_received.get(key, 0) + 1
            return
        if env.type == protocol.ERROR:
            self.errors.append(env.payload)
            return
        if env.type == protocol.ADVISORY:
            self.advisories.append(env.payload)
            return


@dataclass
class SimResult:
    exit_status: int
    report: list[str]
    trace_path: str | None
    scenario: Scenario
    hub: SessionHub
    clients: dict[str, SimClient]
    phases_seen: list[str]
    errors_seen: list[dict]

    @property
    def session(self):
        return self.hub.sessions[self.scenario.sid]


class _TraceWriter:
    def __init__(self, record_frames: bool) -> None:
        self.record_frames = record_frames
        self.lines: list[str] = []

    def sink(self, kind: str, obj: dict) -> None:
        if kind == "frame":
            if not self.record_frames:
                return
            # Frame records already carry their full line shape.
            self.lines.append(canonical_dumps(obj))
        else:
            self.lines.append(canonical_dumps({kind: obj}))


def _generate_trace(spec: ParticipantSpec, channel: SignalChannel, scenario: Scenario, pidx: int) -> SignalTrace | None:
    cfg = scenario.config
    seed = derive_seed(scenario.seed, pidx, CHANNEL_ORDER.index(channel))
    rate = float(cfg.signal_rates.get(channel.value, 8.0))
    if channel is SignalChannel.BVP:
        params = spec.signals.get("bvp")
        if not params:
            return None
        return gen_bvp(float(params["hr_bpm"]), scenario.duration_s, rate, seed)
    if channel is SignalChannel.RESP:
        params = spec.signals.get("resp")
        if not params:
            return None
        return gen_resp(float(params["breaths_per_min"]), scenario.duration_s, rate, seed)
    params = spec.signals.get("sc")
    if not params:
        return None
    events = [(float(t), float(a)) for t, a in params.get("scr_events", [])]
    return gen_sc(float(params["tonic_us"]), events, scenario.duration_s, rate, seed)


def run_scenario(
    scenario: Scenario,
    record: bool = False,
    out_path: str | None = None,
) -> SimResult:
    """Execute a scenario deterministically; optionally record a trace.

    Exit status 0 on success, 1 if any built-in invariant check fails
    (log gaps, replica divergence). Expected ERROR replies (role gates and
    the like) are recorded, not failures.
    """
    scenario.validate()
    cfg = scenario.config
    writer = _TraceWriter(record_frames=record) if (record or out_path) else None
    hub = SessionHub(config=cfg, record_sink=writer.sink if writer else None)

    now = {"ms": 0}
    hub.clock_ms = lambda: now["ms"]

    clients = {p.pid: SimClient(p.pid, scenario.sid, cfg) for p in scenario.participants}
    phases_seen: list[str] = []
    errors_seen: list[dict] = []

    def route(deliveries: list[tuple[str, Envelope]]) -> None:
        for recipient, env in deliveries:
            client = clients.get(recipient)
            if client is not None:
                client.deliver(env)
            if env.type == protocol.LESSON_STATE and recipient == sorted(clients)[0]:
                phases_seen.append(
                    f"{env.payload['phase']}:{env.payload['unit']}" if env.payload["phase"] == "TEACH" else env.payload["phase"]
                )
            if env.type == protocol.ERROR:
                errors_seen.append(env.payload)

    # Build the deterministic event queue: (t_ms, order, fn).
    events: list[tuple[int, int, Callable[[], None]]] = []
    order = 0

    def push(t_ms: int, fn: Callable[[], None]) -> None:
        nonlocal order
        events.append((t_ms, order, fn))
        order += 1

    def make_join(spec: ParticipantSpec) -> Callable[[], None]:
        def fn() -> None:
            _, deliveries = hub.join(scenario.sid, spec.name, spec.role, requested_pid=spec.pid)
            route(deliveries)

        return fn

    # Teacher joins first (creates the session), then the rest in order.
    ordered = sorted(scenario.participants, key=lambda p: 0 if p.role is Role.TEACHER else 1)
    for spec in ordered:
        push(0, make_join(spec))

    def make_send(pid: str, mtype: str, payload: dict) -> Callable[[], None]:
        def fn() -> None:
            client = clients[pid]
            if not client.active:
                return
            env = Envelope(type=mtype, sid=scenario.sid, sender=pid, payload=payload)
            route(hub.handle(scenario.sid, pid, env))

        return fn

    # Signal frames from pre-generated traces.
    for pidx, spec in enumerate(scenario.participants):
        for channel in CHANNEL_ORDER:
            trace = _generate_trace(spec, channel, scenario, pidx)
            if trace is None:
                continue

            def make_frame(pid: str, ch: SignalChannel, t_ms: int, value: float) -> Callable[[], None]:
                def fn() -> None:
                    client = clients[pid]
                    if not client.active:
                        return
                    payload = {
                        "participant": pid,
                        "channel": ch.value,
                        "seq": client.next_frame_seq(ch),
                        "t_ms": t_ms,
                        "value": value,
                    }
                    env = Envelope(type=protocol.SIGNAL_FRAME, sid=scenario.sid, sender=pid, payload=payload)
                    route(hub.handle(scenario.sid, pid, env))

                return fn

            for t_sample_ms, value in trace.samples:
                t_ms = int(round(t_sample_ms))
                push(t_ms, make_frame(spec.pid, channel, t_ms, float(value)))

    # Scripted actions.
    for action in scenario.actions:
        base_ms = int(round(action.at_s * 1000))
        if action.kind == "consent":
            payload = {
                "participant": action.actor,
                "channel": action.params["channel"],
                "share": action.params["share"],
            }
            push(base_ms, make_send(action.actor, protocol.CONSENT_SET, payload))
        elif action.kind == "advance":
            push(base_ms, make_send(action.actor, protocol.LESSON_ADVANCE, {}))
        elif action.kind == "quiz":
            push(base_ms, make_send(action.actor, protocol.QUIZ_JUDGE, {"judgments": action.params["judgments"]}))
        elif action.kind == "clear":
            payload = {"kind": "CLEAR", "board": action.params["board"], "t_ms": base_ms}
            push(base_ms, make_send(action.actor, protocol.BOARD_OP, payload))
        elif action.kind == "leave":
            def make_leave(pid: str) -> Callable[[], None]:
                def fn() -> None:
                    clients[pid].active = False
                    route(hub.leave(scenario.sid, pid))

                return fn

            push(base_ms, make_leave(action.actor))
        elif action.kind == "stroke":
            board = action.params["board"]
            points = [(float(x), float(y)) for x, y in action.params["points"]]

            def make_stroke_ops(pid: str, board_id: str, pts: list[tuple[float, float]], t0: int) -> None:
                stroke_holder: dict[str, str] = {}

                def begin() -> None:
                    client = clients[pid]
                    if not client.active:
                        return
                    stroke_holder["id"] = client.next_stroke_id()
                    payload = {
                        "kind": "STROKE_BEGIN",
                        "board": board_id,
                        "stroke": stroke_holder["id"],
                        "point": [pts[0][0], pts[0][1]],
                        "t_ms": t0,
                    }
                    env = Envelope(type=protocol.BOARD_OP, sid=scenario.sid, sender=pid, payload=payload)
                    route(hub.handle(scenario.sid, pid, env))

                push(t0, begin)

                def make_point(i: int, t_ms: int) -> Callable[[], None]:
                    def fn() -> None:
                        client = clients[pid]
                        if not client.active or "id" not in stroke_holder:
                            return
                        payload = {
                            "kind": "STROKE_POINT",
                            "board": board_id,
                            "stroke": stroke_holder["id"],
                            "point": [pts[i][0], pts[i][1]],
                            "t_ms": t_ms,
                        }
                        env = Envelope(type=protocol.BOARD_OP, sid=scenario.sid, sender=pid, payload=payload)
                        route(hub.handle(scenario.sid, pid, env))

                    return fn

                for i in range(1, len(pts)):
                    push(t0 + i * STROKE_POINT_SPACING_MS, make_point(i, t0 + i * STROKE_POINT_SPACING_MS))

                def end() -> None:
                    client = clients[pid]
                    if not client.active or "id" not in stroke_holder:
                        return
                    payload = {
                        "kind": "STROKE_END",
                        "board": board_id,
                        "stroke": stroke_holder["id"],
                        "t_ms": t0 + len(pts) * STROKE_POINT_SPACING_MS,
                    }
                    env = Envelope(type=protocol.BOARD_OP, sid=scenario.sid, sender=pid, payload=payload)
                    route(hub.handle(scenario.sid, pid, env))

                push(t0 + len(pts) * STROKE_POINT_SPACING_MS, end)

            make_stroke_ops(action.actor, board, points, base_ms)

    # Run the virtual clock.
    heapq.heapify(events)
    while events:
        t_ms, _, fn = heapq.heappop(events)
        now["ms"] = t_ms
        fn()
    now["ms"] = int(round(scenario.duration_s * 1000))

    session = hub.sessions.get(scenario.sid)
    report: list[str] = []
    if session is None:
        report.append("no session was created")
    else:
        seqs = [env.seq for env in session.op_log]
        if seqs != list(range(1, len(seqs) + 1)):
            report.append(f"op log is not gapless 1..n: {seqs[:10]}...")
        server_digest = canonical_dumps(session.state_digest())
        for pid in sorted(clients):
            client = clients[pid]
            if pid not in session.roster:
                continue
            if client.gap_violations:
                report.append(f"client {pid} saw sequence gaps: {client.gap_violations[:3]}")
            client_digest = canonical_dumps(client.replica.state_digest())
            if client_digest != server_digest:
                report.append(f"client {pid} replica diverged from server state")

    trace_path = None
    if writer is not None and out_path:
        trace_path = out_path
        meta = {
            "format": "pulseboard-trace",
            "v": 1,
            "scenario": scenario.name,
            "sid": scenario.sid,
            "seed": scenario.seed,
            "recorded_frames": writer.record_frames,
            "config": cfg.to_wire(),
        }
        final = session.state_digest() if session else None
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(canonical_dumps({"meta": meta}) + "\n")
            for line in writer.lines:
                fh.write(line + "\n")
            fh.write(canonical_dumps({"final": final}) + "\n")

    return SimResult(
        exit_status=1 if report else 0,
        report=report,
        trace_path=trace_path,
        scenario=scenario,
        hub=hub,
        clients=clients,
        phases_seen=phases_seen,
        errors_seen=errors_seen,
    )
