"""Authoritative session state and message handling, transport-agnostic.

All mutations to one session run through a single logical owner: the hub's
methods are synchronous and must be called from one context per session
(the asyncio loop in live mode, the virtual-clock loop in simulation).
Sequenced messages get a gapless per-session number and are appended to
the op log before any fan-out; signal frames are never sequenced and flow
through the reciprocity filter instead.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable

from . import protocol
from .config import ServerConfig
from .display import DisplayConfig
from .errors import (
    AlreadyDoneError,
    DuplicateTeacherError,
    InvalidParameterError,
    NotTeacherError,
    PulseboardError,
    SchemaError,
    SessionFullError,
    UnknownParticipantError,
    UnknownSessionError,
    WrongPhaseError,
)
from .lesson import (
    LessonPhase,
    LessonScript,
    PhaseKind,
    QuizResult,
    Role,
    advance_phase,
    default_script,
    pacing_advisory,
    score_quiz,
)
from .protocol import Envelope
from .reciprocity import ConsentState, filter_frame, may_deliver
from .signals import SignalChannel, SignalFrame, SignalTrace, detect_scr_rate
from .whiteboard import BoardOp, BoardState

Delivery = tuple[str, Envelope]
RecordSink = Callable[[str, dict], None]


@dataclass(frozen=True)
class Participant:
    pid: str
    name: str
    role: Role

    def to_wire(self) -> dict:
        return {"id": self.pid, "name": self.name, "role": self.role.value}


class Session:
    """One lesson session: roster, consent, boards, lesson, sequenced log."""

    def __init__(self, sid: str, config: ServerConfig, script: LessonScript | None = None) -> None:
        self.sid = sid
        self.config = config
        self.roster: dict[str, Participant] = {}
        self.consent = ConsentState()
        self.boards: dict[str, BoardState] = {
            board_id: BoardState(board_id, strict_seq=False) for board_id in config.boards
        }
        self.script = script or default_script()
        self.phase = LessonPhase.intro()
        self.quiz: QuizResult | None = None
        self.op_log: list[Envelope] = []
        self.seq = 0
        self._pid_counter = 0
        self._frame_seq: dict[tuple[str, SignalChannel], int] = {}
        self._sc_buffer: dict[str, deque[tuple[int, float]]] = {}
        self._last_advisory_ms: dict[str, int] = {}

    def teacher_id(self) -> str | None:
        for pid, p in self.roster.items():
            if p.role is Role.TEACHER:
                return pid
        return None

    def count_role(self, role: Role) -> int:
        return sum(1 for p in self.roster.values() if p.role is role)

    def next_pid(self) -> str:
        self._pid_counter += 1
        return f"p{self._pid_counter}"

    def roster_wire(self) -> list[dict]:
        return [self.roster[pid].to_wire() for pid in sorted(self.roster)]

    def state_digest(self) -> dict:
        """Replayable summary of all sequenced state, used for convergence checks."""
        digest: dict = {
            "seq": self.seq,
            "roster": self.roster_wire(),
            "consent": {"version": self.consent.version, "flags": self.consent.flags_snapshot()},
            "boards": {bid: board.snapshot() for bid, board in sorted(self.boards.items())},
            "lesson": self.phase.to_wire(),
            "quiz": self.quiz.to_wire() if self.quiz else None,
        }
        return digest

    def snapshot_payload(self, pid: str) -> dict:
        return {
            "participant": pid,
            "seq": self.seq,
            "roster": self.roster_wire(),
            "consent": {"version": self.consent.version, "flags": self.consent.flags_snapshot()},
            "boards": {bid: board.snapshot() for bid, board in sorted(self.boards.items())},
            "lesson": {**self.phase.to_wire(), "script": self.script.to_wire()},
            "quiz": self.quiz.to_wire() if self.quiz else None,
            "display": self.config.display.to_wire(),
            "signal_rates": dict(self.config.signal_rates),
            "scr_threshold": self.config.scr_threshold,
        }


class SessionHub:
    """Owns sessions; every public method returns the deliveries to send."""

    def __init__(
        self,
        config: ServerConfig | None = None,
        clock_ms: Callable[[], int] | None = None,
        record_sink: RecordSink | None = None,
        script: LessonScript | None = None,
    ) -> None:
        self.config = config or ServerConfig()
        self.clock_ms = clock_ms or (lambda: 0)
        self.record_sink = record_sink
        self.script = script
        self.sessions: dict[str, Session] = {}

    # -- sequencing ---------------------------------------------------

    def sequencer(self, session: Session, envelope: Envelope) -> Envelope:
        """Assign the next seq and append to the log before any fan-out."""
        if envelope.type not in protocol.SEQUENCED_TYPES:
            raise InvalidParameterError(f"{envelope.type} is not a sequenced type")
        session.seq += 1
        envelope.seq = session.seq
        envelope.t_server_ms = self.clock_ms()
        session.op_log.append(envelope)
        if self.record_sink is not None:
            self.record_sink("env", envelope.to_wire())
        return envelope

    def _broadcast(self, session: Session, envelope: Envelope) -> list[Delivery]:
        return [(pid, envelope) for pid in sorted(session.roster)]

    def _error_reply(self, session_id: str, pid: str, code: str, detail: str, re_type: str | None = None) -> Delivery:
        payload = {"code": code, "detail": detail}
        if re_type:
            payload["re"] = re_type
        env = Envelope(
            type=protocol.ERROR,
            sid=session_id,
            sender=protocol.SERVER_ID,
            payload=payload,
            t_server_ms=self.clock_ms(),
        )
        if self.record_sink is not None:
            self.record_sink("error", {**env.to_wire(), "to": pid})
        return (pid, env)

    # -- membership ---------------------------------------------------

    def join(
        self,
        sid: str,
        name: str,
        role: Role,
        requested_pid: str | None = None,
    ) -> tuple[str, list[Delivery]]:
        """Add a participant; returns (pid, deliveries).

        The first TEACHER join creates the session. The joiner receives a
        full state snapshot whose seq horizon covers their own presence
        entry; everyone else receives the sequenced PRESENCE message.
        """
        session = self.sessions.get(sid)
        if session is None:
            if role is not Role.TEACHER:
                raise UnknownSessionError(f"session {sid!r} does not exist")
            session = Session(sid, self.config, script=self.script)
            self.sessions[sid] = session

        if role is Role.TEACHER and session.count_role(Role.TEACHER) >= session.config.max_teachers:
            raise DuplicateTeacherError("session already has a teacher")
        if role is Role.STUDENT and session.count_role(Role.STUDENT) >= session.config.max_students:
            raise SessionFullError("no student slots left")
        if role is Role.OBSERVER and session.count_role(Role.OBSERVER) >= session.config.max_observers:
            raise SessionFullError("no observer slots left")

        pid = requested_pid or session.next_pid()
        if pid in session.roster:
            raise InvalidParameterError(f"participant id {pid!r} already in use")
        session.roster[pid] = Participant(pid, name, role)
        session.consent.add_member(pid)

        presence = Envelope(
            type=protocol.PRESENCE,
            sid=sid,
            sender=pid,
            payload={"participant": pid, "event": "join", "name": name, "role": role.value},
        )
        self.sequencer(session, presence)
        deliveries: list[Delivery] = [(other, presence) for other in sorted(session.roster) if other != pid]

        snapshot = Envelope(
            type=protocol.SNAPSHOT,
            sid=sid,
            sender=protocol.SERVER_ID,
            payload=session.snapshot_payload(pid),
            t_server_ms=self.clock_ms(),
        )
        deliveries.append((pid, snapshot))
        return pid, deliveries

    def leave(self, sid: str, pid: str) -> list[Delivery]:
        """Remove a participant, revoking their consent flags on the record."""
        session = self.sessions.get(sid)
        if session is None or pid not in session.roster:
            return []
        deliveries: list[Delivery] = []
        for channel in session.consent.shared_channels(pid):
            session.consent.set(pid, channel, False)
            deliveries.extend(
                self._broadcast(session, self._consent_state_envelope(session, pid, channel, False))
            )
        presence = Envelope(
            type=protocol.PRESENCE,
            sid=sid,
            sender=pid,
            payload={"participant": pid, "event": "leave"},
        )
        self.sequencer(session, presence)
        deliveries.extend(self._broadcast(session, presence))
        del session.roster[pid]
        session.consent.remove_member(pid)
        session._sc_buffer.pop(pid, None)
        session._last_advisory_ms.pop(pid, None)
        return [(r, env) for r, env in deliveries if r != pid]

    # -- message handling ----------------------------------------------

    def handle(self, sid: str, sender: str, envelope: Envelope) -> list[Delivery]:
        """Route one client message; returns deliveries (possibly an ERROR reply)."""
        session = self.sessions.get(sid)
        if session is None:
            return [self._error_reply(sid, sender, UnknownSessionError.code, f"no session {sid!r}", envelope.type)]
        if sender not in session.roster:
            return [self._error_reply(sid, sender, UnknownParticipantError.code, f"{sender!r} not in roster", envelope.type)]

        try:
            protocol.validate_payload(envelope.type, envelope.payload)
        except SchemaError as exc:
            return [self._error_reply(sid, sender, exc.code, str(exc), envelope.type)]

        try:
            if envelope.type == protocol.SIGNAL_FRAME:
                return self._handle_frame(session, sender, envelope)
            if envelope.type == protocol.CONSENT_SET:
                return self._handle_consent_set(session, sender, envelope)
            if envelope.type == protocol.BOARD_OP:
                return self._handle_board_op(session, sender, envelope)
            if envelope.type == protocol.LESSON_ADVANCE:
                return self._handle_lesson_advance(session, sender)
            if envelope.type == protocol.QUIZ_JUDGE:
                return self._handle_quiz_judge(session, sender, envelope)
            if envelope.type == protocol.PING:
                pong = Envelope(
                    type=protocol.PONG,
                    sid=sid,
                    sender=protocol.SERVER_ID,
                    payload=dict(envelope.payload),
                    t_server_ms=self.clock_ms(),
                )
                return [(sender, pong)]
        except PulseboardError as exc:
            return [self._error_reply(sid, sender, exc.code, str(exc), envelope.type)]

        return [self._error_reply(sid, sender, SchemaError.code, f"type {envelope.type} not accepted from clients", envelope.type)]

    def _handle_frame(self, session: Session, sender: str, envelope: Envelope) -> list[Delivery]:
        payload = envelope.payload
        if payload["participant"] != sender:
            return [self._error_reply(session.sid, sender, SchemaError.code, "frame participant must be the sender", envelope.type)]
        channel = SignalChannel(payload["channel"])
        frame = SignalFrame(
            participant_id=sender,
            channel=channel,
            seq=int(payload["seq"]),
            t_ms=int(payload["t_ms"]),
            value=float(payload["value"]),
        )
        # Latest-wins: stale or replayed frames are dropped, never errored.
        key = (sender, channel)
        if frame.seq <= session._frame_seq.get(key, 0):
            return []
        session._frame_seq[key] = frame.seq

        recipients = filter_frame(session.consent, frame, sorted(session.roster))
        if self.record_sink is not None:
            self.record_sink(
                "frame",
                {
                    "frame": {
                        "participant": frame.participant_id,
                        "channel": channel.value,
                        "seq": frame.seq,
                        "t_ms": frame.t_ms,
                        "value": frame.value,
                    },
                    "recipients": recipients,
                    "consent_version": session.consent.version,
                },
            )
        deliveries: list[Delivery] = [(r, envelope) for r in recipients]
        deliveries.extend(self._maybe_advisory(session, sender, frame))
        return deliveries

    def _consent_state_envelope(self, session: Session, pid: str, channel: SignalChannel, share: bool) -> Envelope:
        envelope = Envelope(
            type=protocol.CONSENT_STATE,
            sid=session.sid,
            sender=pid,
            payload={
                "participant": pid,
                "channel": channel.value,
                "share": share,
                "version": session.consent.version,
                "flags": session.consent.flags_snapshot(),
            },
        )
        return self.sequencer(session, envelope)

    def _handle_consent_set(self, session: Session, sender: str, envelope: Envelope) -> list[Delivery]:
        payload = envelope.payload
        if payload["participant"] != sender:
            return [self._error_reply(session.sid, sender, SchemaError.code, "consent participant must be the sender", envelope.type)]
        channel = SignalChannel(payload["channel"])
        share = bool(payload["share"])
        session.consent.set(sender, channel, share)
        # Flags are public to the session even while the data stays gated.
        state_env = self._consent_state_envelope(session, sender, channel, share)
        return self._broadcast(session, state_env)

    def _handle_board_op(self, session: Session, sender: str, envelope: Envelope) -> list[Delivery]:
        board_id = envelope.payload["board"]
        board = session.boards.get(board_id)
        if board is None:
            return [self._error_reply(session.sid, sender, InvalidParameterError.code, f"unknown board {board_id!r}", envelope.type)]
        sequenced = Envelope(
            type=protocol.BOARD_OP,
            sid=session.sid,
            sender=sender,
            payload=dict(envelope.payload),
        )
        self.sequencer(session, sequenced)
        op = BoardOp.from_wire(sequenced.payload, author=sender, seq=sequenced.seq)
        board.apply_op(op)
        return self._broadcast(session, sequenced)

    def _handle_lesson_advance(self, session: Session, sender: str) -> list[Delivery]:
        role = session.roster[sender].role
        session.phase = advance_phase(session.phase, role)
        state_env = Envelope(
            type=protocol.LESSON_STATE,
            sid=session.sid,
            sender=sender,
            payload=session.phase.to_wire(),
        )
        self.sequencer(session, state_env)
        return self._broadcast(session, state_env)

    def _handle_quiz_judge(self, session: Session, sender: str, envelope: Envelope) -> list[Delivery]:
        role = session.roster[sender].role
        if role is not Role.TEACHER:
            raise NotTeacherError("only the teacher judges the quiz")
        if session.phase.kind not in (PhaseKind.QUIZ, PhaseKind.DONE):
            raise WrongPhaseError(f"quiz judged in phase {session.phase.encode()}")
        result = score_quiz(envelope.payload["judgments"])
        session.quiz = result
        judged = Envelope(
            type=protocol.QUIZ_JUDGE,
            sid=session.sid,
            sender=sender,
            payload=result.to_wire(),
        )
        self.sequencer(session, judged)
        return self._broadcast(session, judged)

    # -- pacing advisory -------------------------------------------------

    def _maybe_advisory(self, session: Session, sender: str, frame: SignalFrame) -> list[Delivery]:
        """Teacher-facing RELAX/OK advisory from a student's SC activity.

        Derived from a gated channel, so it obeys the same delivery rule as
        the frames themselves.
        """
        cfg = session.config
        if not cfg.advisory_banner or frame.channel is not SignalChannel.SC:
            return []
        if session.roster[sender].role is not Role.STUDENT:
            return []
        teacher = session.teacher_id()
        if teacher is None:
            return []

        buffer = session._sc_buffer.setdefault(sender, deque())
        buffer.append((frame.t_ms, frame.value))
        horizon = frame.t_ms - cfg.advisory_window_s * 1000.0
        while buffer and buffer[0][0] < horizon:
            buffer.popleft()

        rate_hz = float(cfg.signal_rates.get(SignalChannel.SC.value, 4.0))
        if len(buffer) < int(rate_hz * 10.0) + 1:
            return []
        now = self.clock_ms()
        last = session._last_advisory_ms.get(sender)
        if last is not None and now - last < cfg.advisory_interval_s * 1000.0:
            return []
        if not may_deliver(session.consent, sender, teacher, SignalChannel.SC).allowed:
            return []

        trace = SignalTrace(
            channel=SignalChannel.SC,
            rate_hz=rate_hz,
            samples=[(float(t), v) for t, v in buffer],
        )
        scr_rate = detect_scr_rate(trace, cfg.scr_slope_threshold)
        advisory = pacing_advisory(scr_rate, cfg.scr_threshold)
        session._last_advisory_ms[sender] = now
        env = Envelope(
            type=protocol.ADVISORY,
            sid=session.sid,
            sender=protocol.SERVER_ID,
            payload={"participant": sender, **advisory.to_wire()},
            t_server_ms=now,
        )
        return [(teacher, env)]


class SessionReplica:
    """Client-side / offline fold of the sequenced envelope stream.

    Feeding it the op log from empty reproduces the server's state digest;
    simulation clients use it incrementally to prove convergence.
    """

    def __init__(self, sid: str, config: ServerConfig | None = None) -> None:
        self.sid = sid
        self.config = config or ServerConfig()
        self.roster: dict[str, Participant] = {}
        self.consent = ConsentState()
        self.boards: dict[str, BoardState] = {
            board_id: BoardState(board_id, strict_seq=False) for board_id in self.config.boards
        }
        self.phase = LessonPhase.intro()
        self.quiz: QuizResult | None = None
        self.seq = 0
        self.seen_seqs: list[int] = []

    def load_snapshot(self, payload: dict) -> None:
        self.seq = int(payload["seq"])
        self.roster = {
            entry["id"]: Participant(entry["id"], entry["name"], Role(entry["role"]))
            for entry in payload["roster"]
        }
        self.consent = ConsentState(self.roster)
        for pid, flags in payload["consent"]["flags"].items():
            for ch_name, share in flags.items():
                if share:
                    self.consent._flags[(pid, SignalChannel(ch_name))] = True
        self.consent.version = int(payload["consent"]["version"])
        for bid, board_wire in payload["boards"].items():
            board = BoardState(bid, strict_seq=False)
            board.last_seq = int(board_wire["last_seq"])
            for s in board_wire["strokes"]:
                stroke = _stroke_from_wire(s)
                board.strokes.append(stroke)
                if not stroke.closed:
                    board._open[(stroke.author, stroke.stroke_id)] = stroke
            self.boards[bid] = board
        self.phase = LessonPhase.from_wire(payload["lesson"])
        if payload.get("quiz"):
            q = payload["quiz"]
            self.quiz = QuizResult(tuple(bool(j) for j in q["judgments"]), int(q["correct"]), float(q["score"]))

    def apply(self, envelope: Envelope) -> None:
        if envelope.type not in protocol.SEQUENCED_TYPES:
            return
        if envelope.seq is None:
            raise SchemaError(f"{envelope.type} without seq")
        self.seen_seqs.append(envelope.seq)
        self.seq = envelope.seq
        payload = envelope.payload
        if envelope.type == protocol.PRESENCE:
            pid = payload["participant"]
            if payload["event"] == "join":
                self.roster[pid] = Participant(pid, payload["name"], Role(payload["role"]))
                self.consent.add_member(pid)
            else:
                self.roster.pop(pid, None)
                self.consent.remove_member(pid)
        elif envelope.type == protocol.CONSENT_STATE:
            pid = payload["participant"]
            if not self.consent.is_member(pid):
                self.consent.add_member(pid)
            self.consent.set(pid, SignalChannel(payload["channel"]), bool(payload["share"]))
        elif envelope.type == protocol.BOARD_OP:
            board = self.boards.get(payload["board"])
            if board is None:
                raise SchemaError(f"board op for unknown board {payload['board']!r}")
            board.apply_op(BoardOp.from_wire(payload, author=envelope.sender, seq=envelope.seq))
        elif envelope.type == protocol.LESSON_STATE:
            self.phase = LessonPhase.from_wire(payload)
        elif envelope.type == protocol.QUIZ_JUDGE:
            self.quiz = QuizResult(
                tuple(bool(j) for j in payload["judgments"]),
                int(payload["correct"]),
                float(payload["score"]),
            )

    def roster_wire(self) -> list[dict]:
        return [self.roster[pid].to_wire() for pid in sorted(self.roster)]

    def state_digest(self) -> dict:
        return {
            "seq": self.seq,
            "roster": self.roster_wire(),
            "consent": {"version": self.consent.version, "flags": self.consent.flags_snapshot()},
            "boards": {bid: board.snapshot() for bid, board in sorted(self.boards.items())},
            "lesson": self.phase.to_wire(),
            "quiz": self.quiz.to_wire() if self.quiz else None,
        }


def _stroke_from_wire(wire: dict):
    from .whiteboard import Stroke

    return Stroke(
        stroke_id=wire["stroke"],
        author=wire["author"],
        index=int(wire["index"]),
        points=[(float(x), float(y)) for x, y in wire["points"]],
        closed=bool(wire["closed"]),
    )


def replay_log(sid: str, config: ServerConfig, envelopes: Iterable[Envelope]) -> SessionReplica:
    """Fold a sequenced envelope log from an empty session."""
    replica = SessionReplica(sid, config)
    for env in envelopes:
        replica.apply(env)
    return replica
