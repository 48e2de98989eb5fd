"""Offline trace auditing: reciprocity at the wire, ordering, replay, bounds.

A trace is JSON Lines: a meta header, sequenced envelopes ({"env": ...}),
recorded frame deliveries ({"frame": ..., "recipients": [...],
"consent_version": n}), ERROR replies ({"error": ...}) and a final state
digest ({"final": ...}). The checker needs nothing but the file: every
delivery decision is audited against the consent snapshot version it
recorded.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
import json

from . import protocol
from .config import ServerConfig
from .display import compute_display
from .errors import MalformedTraceError, NoFramesError, SchemaError
from .lesson import LESSON_UNITS, LessonPhase, PHASE_CHAIN, phase_index
from .protocol import Envelope, canonical_dumps
from .server import replay_log
from .signals import SignalChannel, SignalFrame


@dataclass
class TraceRecord:
    kind: str  # meta | env | frame | error | final
    obj: dict
    line_no: int


@dataclass
class Trace:
    meta: dict
    records: list[TraceRecord]

    @property
    def config(self) -> ServerConfig:
        return ServerConfig.from_wire(self.meta.get("config", {}))

    def envelopes_raw(self) -> list[TraceRecord]:
        return [r for r in self.records if r.kind == "env"]

    def frames_raw(self) -> list[TraceRecord]:
        return [r for r in self.records if r.kind == "frame"]

    def final_digest(self) -> dict | None:
        for r in self.records:
            if r.kind == "final":
                return r.obj
        return None


def read_trace(path: str) -> Trace:
    """Parse a trace file; structural damage raises MalformedTraceError."""
    records: list[TraceRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedTraceError(f"line {line_no}: not valid JSON: {exc}") from exc
            if not isinstance(obj, dict) or len(obj) == 0:
                raise MalformedTraceError(f"line {line_no}: record must be a non-empty object")
            kind = next(iter(obj)) if len(obj) == 1 else None
            if len(obj) == 1 and kind in ("meta", "env", "error", "final"):
                records.append(TraceRecord(kind, obj[kind], line_no))
            elif "frame" in obj:
                records.append(TraceRecord("frame", obj, line_no))
            else:
                raise MalformedTraceError(f"line {line_no}: unknown record shape {sorted(obj)}")
    if not records or records[0].kind != "meta":
        raise MalformedTraceError("first line must be the trace meta record")
    meta = records[0].obj
    if meta.get("format") != "pulseboard-trace":
        raise MalformedTraceError(f"unknown trace format {meta.get('format')!r}")
    return Trace(meta=meta, records=records[1:])


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}" + (f": {self.detail}" if self.detail and not self.passed else "")


@dataclass
class CheckReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(CheckResult(name, passed, detail))


def _parse_envelopes(trace: Trace) -> tuple[list[tuple[Envelope, int]], list[str]]:
    parsed: list[tuple[Envelope, int]] = []
    problems: list[str] = []
    for rec in trace.envelopes_raw():
        try:
            env = Envelope.from_wire(rec.obj)
            protocol.validate_payload(env.type, env.payload)
            parsed.append((env, rec.line_no))
        except SchemaError as exc:
            problems.append(f"line {rec.line_no}: {exc}")
    return parsed, problems


def check_trace(trace: Trace) -> CheckReport:
    """Run every offline invariant; one result per named check."""
    report = CheckReport()
    envelopes, schema_problems = _parse_envelopes(trace)
    report.add(
        "envelope-schema",
        not schema_problems,
        schema_problems[0] if schema_problems else "",
    )

    # Gapless total order, sequenced types only, timestamps non-decreasing.
    seq_problem = ""
    expected = 1
    last_ts = None
    for env, line_no in envelopes:
        if env.type not in protocol.SEQUENCED_TYPES:
            seq_problem = seq_problem or f"line {line_no}: unsequenced type {env.type} in log"
        if env.seq != expected:
            seq_problem = seq_problem or f"line {line_no}: expected seq {expected}, got {env.seq}"
            expected = (env.seq or expected) + 1
        else:
            expected += 1
        if env.t_server_ms is None:
            seq_problem = seq_problem or f"line {line_no}: sequenced envelope without t_server_ms"
        elif last_ts is not None and env.t_server_ms < last_ts:
            seq_problem = seq_problem or f"line {line_no}: t_server_ms went backwards"
        if env.t_server_ms is not None:
            last_ts = env.t_server_ms
    report.add("gapless-sequencing", not seq_problem, seq_problem)

    # Consent version chain: the k-th consent change carries version k and a
    # flags snapshot consistent with folding every change so far.
    consent_problem = ""
    folded_flags: dict[tuple[str, str], bool] = {}
    versions_snapshots: list[dict[tuple[str, str], bool]] = [dict()]
    version_count = 0
    members_seen: set[str] = set()
    role_by_pid: dict[str, str] = {}
    for env, line_no in envelopes:
        if env.type == protocol.PRESENCE:
            pid = env.payload.get("participant")
            if env.payload.get("event") == "join":
                members_seen.add(pid)
                role_by_pid[pid] = env.payload.get("role", "")
        if env.type != protocol.CONSENT_STATE:
            continue
        version_count += 1
        payload = env.payload
        if payload.get("version") != version_count:
            consent_problem = consent_problem or (
                f"line {line_no}: consent version {payload.get('version')} breaks the +1 chain (expected {version_count})"
            )
        pid = payload.get("participant")
        if pid not in members_seen:
            consent_problem = consent_problem or f"line {line_no}: consent change for unknown participant {pid!r}"
        folded_flags[(pid, payload.get("channel"))] = bool(payload.get("share"))
        recorded = payload.get("flags", {})
        for member, flags in recorded.items():
            for ch_name, share in flags.items():
                if folded_flags.get((member, ch_name), False) != bool(share):
                    consent_problem = consent_problem or (
                        f"line {line_no}: flags snapshot disagrees with folded consent for ({member},{ch_name})"
                    )
        versions_snapshots.append(dict(folded_flags))
    report.add("consent-version-chain", not consent_problem, consent_problem)

    # Reciprocity at the wire, plus frame stream sanity.
    recip_problem = ""
    frame_problem = ""
    version_at_position = 0
    last_frame_version = 0
    frame_seqs: dict[tuple[str, str], int] = {}
    frame_times: dict[tuple[str, str], int] = {}
    roster_so_far: set[str] = set()
    # Walk records in file order, folding envelope-side state as we pass them.
    env_positions = {line_no: env for env, line_no in envelopes}
    for rec in trace.records:
        if rec.kind == "env":
            env = env_positions.get(rec.line_no)
            if env is None:
                continue
            if env.type == protocol.CONSENT_STATE:
                version_at_position += 1
            if env.type == protocol.PRESENCE:
                pid = env.payload.get("participant")
                if env.payload.get("event") == "join":
                    roster_so_far.add(pid)
                else:
                    roster_so_far.discard(pid)
            continue
        if rec.kind != "frame":
            continue
        obj = rec.obj
        frame = obj.get("frame", {})
        recipients = obj.get("recipients", [])
        version = obj.get("consent_version")
        sender = frame.get("participant")
        channel = frame.get("channel")
        if not isinstance(version, int) or version < 0 or version > version_at_position:
            recip_problem = recip_problem or (
                f"line {rec.line_no}: consent_version {version!r} not available at this point (have {version_at_position})"
            )
            continue
        if version < last_frame_version:
            recip_problem = recip_problem or f"line {rec.line_no}: consent_version regressed"
        last_frame_version = max(last_frame_version, version)
        if sender not in roster_so_far:
            frame_problem = frame_problem or f"line {rec.line_no}: frame from non-member {sender!r}"
        value = frame.get("value")
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(float(value)):
            frame_problem = frame_problem or f"line {rec.line_no}: non-finite or missing frame value"
        key = (sender, channel)
        seq = frame.get("seq")
        if not isinstance(seq, int) or seq <= frame_seqs.get(key, 0):
            frame_problem = frame_problem or f"line {rec.line_no}: frame seq not strictly increasing for {key}"
        else:
            frame_seqs[key] = seq
        t_ms = frame.get("t_ms")
        if not isinstance(t_ms, int) or t_ms < frame_times.get(key, 0):
            frame_problem = frame_problem or f"line {rec.line_no}: frame t_ms decreased for {key}"
        else:
            frame_times[key] = t_ms
        flags = versions_snapshots[version] if version < len(versions_snapshots) else versions_snapshots[-1]
        for recipient in recipients:
            if recipient == sender:
                continue
            if recipient not in roster_so_far:
                recip_problem = recip_problem or (
                    f"line {rec.line_no}: delivery to non-member {recipient!r}"
                )
                continue
            if not (flags.get((sender, channel), False) and flags.get((recipient, channel), False)):
                recip_problem = recip_problem or (
                    f"line {rec.line_no}: frame {sender}->{recipient} ({channel}) without mutual consent at version {version}"
                )
    report.add("reciprocity-at-the-wire", not recip_problem, recip_problem)
    report.add("frame-stream-sanity", not frame_problem, frame_problem)

    # Lesson phase chain and quiz consistency.
    lesson_problem = ""
    current_phase = LessonPhase.intro()
    quiz_seen_at: str | None = None
    for env, line_no in envelopes:
        if env.type == protocol.LESSON_STATE:
            try:
                nxt = LessonPhase.from_wire(env.payload)
            except Exception:
                lesson_problem = lesson_problem or f"line {line_no}: unparseable lesson phase"
                continue
            if phase_index(nxt) != phase_index(current_phase) + 1:
                lesson_problem = lesson_problem or (
                    f"line {line_no}: phase {nxt.encode()} does not follow {current_phase.encode()}"
                )
            if role_by_pid.get(env.sender) != "TEACHER":
                lesson_problem = lesson_problem or f"line {line_no}: phase change from non-teacher {env.sender!r}"
            current_phase = nxt
        elif env.type == protocol.QUIZ_JUDGE:
            judgments = env.payload.get("judgments", [])
            correct = env.payload.get("correct")
            score = env.payload.get("score")
            if role_by_pid.get(env.sender) != "TEACHER":
                lesson_problem = lesson_problem or f"line {line_no}: quiz judged by non-teacher {env.sender!r}"
            if current_phase.kind.value not in ("QUIZ", "DONE"):
                lesson_problem = lesson_problem or f"line {line_no}: quiz judged in phase {current_phase.encode()}"
            if len(judgments) != LESSON_UNITS:
                lesson_problem = lesson_problem or f"line {line_no}: quiz arity {len(judgments)}"
            elif correct != sum(bool(j) for j in judgments) or not isinstance(score, (int, float)) or abs(
                float(score) - correct / LESSON_UNITS
            ) > 1e-9:
                lesson_problem = lesson_problem or f"line {line_no}: quiz score inconsistent"
            quiz_seen_at = quiz_seen_at or current_phase.encode()
    report.add("lesson-phase-chain", not lesson_problem, lesson_problem)

    # Replay equivalence against the recorded final state.
    final = trace.final_digest()
    if final is None:
        report.add("replay-equivalence", True, "no final record; skipped")
    else:
        try:
            replica = replay_log(trace.meta.get("sid", "session"), trace.config, [env for env, _ in envelopes])
            replay_digest = canonical_dumps(replica.state_digest())
            final_digest = canonical_dumps(final)
            report.add(
                "replay-equivalence",
                replay_digest == final_digest,
                "" if replay_digest == final_digest else "replayed state differs from recorded final state",
            )
        except Exception as exc:
            report.add("replay-equivalence", False, f"replay failed: {exc}")

    # Ambient display bounds over every recorded frame stream.
    bounds_problem = ""
    cfg = trace.config
    display_cfg = cfg.display
    window_ms = display_cfg.window_s * 1000.0
    buffers: dict[tuple[str, str], deque] = {}
    eps = 1e-9
    for rec in trace.records:
        if rec.kind != "frame":
            continue
        frame = rec.obj.get("frame", {})
        sender = frame.get("participant")
        channel = frame.get("channel")
        value = frame.get("value")
        t_ms = frame.get("t_ms")
        if channel not in ("BVP", "RESP", "SC") or not isinstance(value, (int, float)) or isinstance(value, bool):
            continue  # already flagged by frame-stream-sanity
        if not math.isfinite(float(value)):
            continue
        key = (sender, channel)
        buf = buffers.setdefault(key, deque())
        buf.append(SignalFrame(sender, SignalChannel(channel), int(frame.get("seq", 1)), int(t_ms), float(value)))
        while buf and buf[0].t_ms < t_ms - window_ms:
            buf.popleft()
        params = compute_display(list(buf), display_cfg, int(t_ms), participant_id=sender)
        if not (display_cfg.r_min - eps <= params.heart_radius <= display_cfg.r_max + eps):
            bounds_problem = bounds_problem or f"line {rec.line_no}: heart_radius {params.heart_radius} out of range"
        if not (display_cfg.h_min - eps <= params.lung_height <= display_cfg.h_max + eps):
            bounds_problem = bounds_problem or f"line {rec.line_no}: lung_height {params.lung_height} out of range"
        if not (-eps <= params.sweat_density <= display_cfg.d_max + eps):
            bounds_problem = bounds_problem or f"line {rec.line_no}: sweat_density {params.sweat_density} out of range"
    report.add("display-bounds", not bounds_problem, bounds_problem)

    return report


def emit_display_csv(trace: Trace, participant: str) -> str:
    """Reconstruct the peer-visible ambient display values for a participant.

    Only frames that actually reached someone beyond their author count:
    this is the display peers saw, so ungated channels read neutral.
    """
    from .display import CSV_HEADER

    cfg = trace.config.display
    window_ms = cfg.window_s * 1000.0
    buffer: list[SignalFrame] = []
    rows: list[str] = [CSV_HEADER]
    found = False
    for rec in trace.records:
        if rec.kind != "frame":
            continue
        frame_obj = rec.obj.get("frame", {})
        if frame_obj.get("participant") != participant:
            continue
        recipients = rec.obj.get("recipients", [])
        if not any(r != participant for r in recipients):
            continue
        found = True
        frame = SignalFrame(
            participant_id=participant,
            channel=SignalChannel(frame_obj["channel"]),
            seq=int(frame_obj["seq"]),
            t_ms=int(frame_obj["t_ms"]),
            value=float(frame_obj["value"]),
        )
        buffer.append(frame)
        horizon = frame.t_ms - window_ms
        buffer = [f for f in buffer if f.t_ms >= horizon]
        params = compute_display(buffer, cfg, frame.t_ms, participant_id=participant)
        rows.append(params.csv_row())
    if not found:
        raise NoFramesError(f"no shared frames for participant {participant!r}")
    return "\n".join(rows) + "\n"
