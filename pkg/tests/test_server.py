from __future__ import annotations

import pytest

from pulseboard import protocol
from pulseboard.config import ServerConfig
from pulseboard.errors import (
    DuplicateTeacherError,
    SessionFullError,
    UnknownSessionError,
)
from pulseboard.lesson import Role
from pulseboard.protocol import Envelope, canonical_dumps
from pulseboard.server import SessionHub, replay_log
from pulseboard.signals import SignalChannel


def make_hub(**config_kwargs):
    hub = SessionHub(config=ServerConfig(**config_kwargs))
    clock = {"ms": 0}
    hub.clock_ms = lambda: clock["ms"]
    return hub, clock


def join(hub, sid, pid, role, name=None):
    got_pid, deliveries = hub.join(sid, name or pid, role, requested_pid=pid)
    assert got_pid == pid
    return deliveries


def env(mtype, sid, sender, payload):
    return Envelope(type=mtype, sid=sid, sender=sender, payload=payload)


def consent(hub, sid, pid, channel, share=True):
    return hub.handle(sid, pid, env("CONSENT_SET", sid, pid, {"participant": pid, "channel": channel, "share": share}))


def frame(hub, sid, pid, channel="SC", seq=1, t_ms=0, value=2.0):
    payload = {"participant": pid, "channel": channel, "seq": seq, "t_ms": t_ms, "value": value}
    return hub.handle(sid, pid, env("SIGNAL_FRAME", sid, pid, payload))


class TestJoin:
    def test_teacher_genesis(self):
        hub, _ = make_hub()
        deliveries = join(hub, "s1", "t", Role.TEACHER)
        assert [d[0] for d in deliveries] == ["t"]
        snapshot = deliveries[0][1]
        assert snapshot.type == protocol.SNAPSHOT
        assert snapshot.payload["lesson"]["phase"] == "INTRO"
        assert all(not b["strokes"] for b in snapshot.payload["boards"].values())
        assert snapshot.payload["seq"] == 1  # own presence

    def test_duplicate_teacher(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        with pytest.raises(DuplicateTeacherError):
            hub.join("s1", "T2", Role.TEACHER)

    def test_student_needs_session(self):
        hub, _ = make_hub()
        with pytest.raises(UnknownSessionError):
            hub.join("nope", "S", Role.STUDENT)

    def test_student_snapshot_at_log_head(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        deliveries = join(hub, "s1", "s", Role.STUDENT)
        snapshot = [e for pid, e in deliveries if pid == "s" and e.type == protocol.SNAPSHOT][0]
        assert snapshot.payload["seq"] == hub.sessions["s1"].seq
        presence_to_teacher = [e for pid, e in deliveries if pid == "t"]
        assert [e.type for e in presence_to_teacher] == [protocol.PRESENCE]

    def test_session_full(self):
        hub, _ = make_hub(max_students=1)
        join(hub, "s1", "t", Role.TEACHER)
        join(hub, "s1", "s1p", Role.STUDENT)
        with pytest.raises(SessionFullError):
            hub.join("s1", "S2", Role.STUDENT)


class TestFrames:
    def test_unshared_frame_reaches_only_sender(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        join(hub, "s1", "s", Role.STUDENT)
        deliveries = frame(hub, "s1", "t")
        assert [pid for pid, _ in deliveries] == ["t"]

    def test_mutual_frame_reaches_both(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        join(hub, "s1", "s", Role.STUDENT)
        consent(hub, "s1", "t", "SC")
        consent(hub, "s1", "s", "SC")
        deliveries = frame(hub, "s1", "t")
        assert sorted(pid for pid, _ in deliveries) == ["s", "t"]

    def test_frames_are_not_sequenced(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        before = hub.sessions["s1"].seq
        deliveries = frame(hub, "s1", "t")
        assert hub.sessions["s1"].seq == before
        assert all(e.seq is None for _, e in deliveries)

    def test_stale_frame_dropped(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        frame(hub, "s1", "t", seq=5)
        assert frame(hub, "s1", "t", seq=5) == []
        assert frame(hub, "s1", "t", seq=4) == []
        assert frame(hub, "s1", "t", seq=6) != []

    def test_spoofed_participant_rejected(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        join(hub, "s1", "s", Role.STUDENT)
        payload = {"participant": "s", "channel": "SC", "seq": 1, "t_ms": 0, "value": 1.0}
        deliveries = hub.handle("s1", "t", env("SIGNAL_FRAME", "s1", "t", payload))
        assert deliveries[0][0] == "t"
        assert deliveries[0][1].type == protocol.ERROR


class TestConsent:
    def test_flags_are_public(self):
        # The consent-change broadcast reaches even non-sharing members.
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        join(hub, "s1", "s", Role.STUDENT)
        deliveries = consent(hub, "s1", "t", "SC")
        assert sorted(pid for pid, _ in deliveries) == ["s", "t"]
        state_env = deliveries[0][1]
        assert state_env.type == protocol.CONSENT_STATE
        assert state_env.seq is not None
        assert state_env.payload["flags"]["t"]["SC"] is True

    def test_consent_for_other_rejected(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        join(hub, "s1", "s", Role.STUDENT)
        deliveries = hub.handle(
            "s1", "t", env("CONSENT_SET", "s1", "t", {"participant": "s", "channel": "SC", "share": True})
        )
        assert deliveries[0][1].type == protocol.ERROR


class TestBoardsAndLesson:
    def test_board_op_broadcast_with_fresh_seq(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        join(hub, "s1", "s", Role.STUDENT)
        payload = {"kind": "STROKE_BEGIN", "board": "student", "stroke": "s-1", "point": [0.5, 0.5], "t_ms": 10}
        deliveries = hub.handle("s1", "s", env("BOARD_OP", "s1", "s", payload))
        assert sorted(pid for pid, _ in deliveries) == ["s", "t"]
        assert deliveries[0][1].seq == hub.sessions["s1"].seq

    def test_unknown_board_errors(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        deliveries = hub.handle(
            "s1", "t", env("BOARD_OP", "s1", "t", {"kind": "CLEAR", "board": "nope"})
        )
        assert deliveries[0][1].type == protocol.ERROR

    def test_lesson_advance_role_gate(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        join(hub, "s1", "s", Role.STUDENT)
        deliveries = hub.handle("s1", "s", env("LESSON_ADVANCE", "s1", "s", {}))
        assert deliveries == [("s", deliveries[0][1])]
        assert deliveries[0][1].type == protocol.ERROR
        assert deliveries[0][1].payload["code"] == "not-teacher"

    def test_lesson_advance_broadcast(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        deliveries = hub.handle("s1", "t", env("LESSON_ADVANCE", "s1", "t", {}))
        state = deliveries[0][1]
        assert state.type == protocol.LESSON_STATE
        assert state.payload == {"phase": "TEACH", "unit": 1}

    def test_quiz_wrong_phase(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        deliveries = hub.handle(
            "s1", "t", env("QUIZ_JUDGE", "s1", "t", {"judgments": [True] * 5})
        )
        assert deliveries[0][1].type == protocol.ERROR
        assert deliveries[0][1].payload["code"] == "wrong-phase"

    def test_quiz_scored_and_broadcast(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        for _ in range(7):  # INTRO -> ... -> QUIZ
            hub.handle("s1", "t", env("LESSON_ADVANCE", "s1", "t", {}))
        deliveries = hub.handle(
            "s1", "t", env("QUIZ_JUDGE", "s1", "t", {"judgments": [True, True, False, True, True]})
        )
        judged = deliveries[0][1]
        assert judged.type == protocol.QUIZ_JUDGE
        assert judged.payload["correct"] == 4
        assert judged.payload["score"] == pytest.approx(0.8)


class TestSequencerAndReplay:
    def test_gapless_and_logged_before_fanout(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        join(hub, "s1", "s", Role.STUDENT)
        consent(hub, "s1", "t", "SC")
        hub.handle("s1", "t", env("LESSON_ADVANCE", "s1", "t", {}))
        session = hub.sessions["s1"]
        assert [e.seq for e in session.op_log] == [1, 2, 3, 4]

    def test_replay_reproduces_state(self):
        hub, clock = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        join(hub, "s1", "s", Role.STUDENT)
        consent(hub, "s1", "t", "SC")
        consent(hub, "s1", "s", "SC")
        clock["ms"] = 500
        hub.handle("s1", "s", env(
            "BOARD_OP", "s1", "s",
            {"kind": "STROKE_BEGIN", "board": "student", "stroke": "x", "point": [0.1, 0.9], "t_ms": 500},
        ))
        hub.handle("s1", "t", env("LESSON_ADVANCE", "s1", "t", {}))
        session = hub.sessions["s1"]
        replica = replay_log("s1", session.config, session.op_log)
        assert canonical_dumps(replica.state_digest()) == canonical_dumps(session.state_digest())

    def test_empty_log_first_seq_is_one(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        assert hub.sessions["s1"].op_log[0].seq == 1


class TestAdvisory:
    def feed_sc(self, hub, clock, sid, pid, values, rate_hz=4.0):
        deliveries = []
        for i, v in enumerate(values):
            t_ms = int(i * 1000 / rate_hz)
            clock["ms"] = t_ms
            deliveries.extend(frame(hub, sid, pid, channel="SC", seq=i + 1, t_ms=t_ms, value=v))
        return [e for _, e in deliveries if e.type == protocol.ADVISORY]

    def make_session(self, share_teacher=True, share_student=True):
        hub, clock = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        join(hub, "s1", "s", Role.STUDENT)
        if share_teacher:
            consent(hub, "s1", "t", "SC")
        if share_student:
            consent(hub, "s1", "s", "SC")
        return hub, clock

    def sc_values(self, n=120, events=(12.0, 19.0, 26.0)):
        from pulseboard.signals import gen_sc

        trace = gen_sc(2.0, [(t, 0.6) for t in events], n / 4.0, 4.0, 1)
        return [v for _, v in trace.samples]

    def test_relax_advisory_reaches_teacher(self):
        hub, clock = self.make_session()
        advisories = self.feed_sc(hub, clock, "s1", "s", self.sc_values())
        assert advisories, "expected at least one advisory"
        assert any(a.payload["advisory"] == "RELAX" for a in advisories)
        assert all(a.payload["participant"] == "s" for a in advisories)

    def test_advisory_gated_by_reciprocity(self):
        hub, clock = self.make_session(share_teacher=False)
        advisories = self.feed_sc(hub, clock, "s1", "s", self.sc_values())
        assert advisories == []

    def test_advisory_disabled_by_config(self):
        hub, clock = make_hub(advisory_banner=False)
        join(hub, "s1", "t", Role.TEACHER)
        join(hub, "s1", "s", Role.STUDENT)
        consent(hub, "s1", "t", "SC")
        consent(hub, "s1", "s", "SC")
        advisories = self.feed_sc(hub, clock, "s1", "s", self.sc_values())
        assert advisories == []

    def test_teacher_frames_never_trigger_advisory(self):
        hub, clock = self.make_session()
        advisories = self.feed_sc(hub, clock, "s1", "t", self.sc_values())
        assert advisories == []


class TestLeave:
    def test_leave_revokes_on_the_record(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        join(hub, "s1", "s", Role.STUDENT)
        consent(hub, "s1", "s", "SC")
        consent(hub, "s1", "s", "BVP")
        deliveries = hub.leave("s1", "s")
        types = [e.type for pid, e in deliveries if pid == "t"]
        assert types.count(protocol.CONSENT_STATE) == 2
        assert types[-1] == protocol.PRESENCE
        session = hub.sessions["s1"]
        assert "s" not in session.roster
        replica = replay_log("s1", session.config, session.op_log)
        assert canonical_dumps(replica.state_digest()) == canonical_dumps(session.state_digest())

    def test_unknown_sender_gets_error(self):
        hub, _ = make_hub()
        join(hub, "s1", "t", Role.TEACHER)
        deliveries = hub.handle("s1", "ghost", env("PING", "s1", "ghost", {}))
        assert deliveries[0][1].type == protocol.ERROR
        assert deliveries[0][1].payload["code"] == "unknown-participant"
