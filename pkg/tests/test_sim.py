from __future__ import annotations

import hashlib

import pytest

from pulseboard.config import ServerConfig
from pulseboard.errors import ScenarioError
from pulseboard.lesson import Role
from pulseboard.sim import (
    Action,
    ParticipantSpec,
    Scenario,
    load_scenario,
    run_scenario,
)


def sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


class TestScenarioValidation:
    def base(self, **kwargs):
        defaults = dict(
            name="t",
            sid="s",
            seed=1,
            duration_s=10.0,
            participants=[
                ParticipantSpec("t", "T", Role.TEACHER),
                ParticipantSpec("s", "S", Role.STUDENT),
            ],
            actions=[],
        )
        defaults.update(kwargs)
        return Scenario(**defaults)

    def test_valid(self):
        self.base().validate()

    def test_needs_one_teacher(self):
        with pytest.raises(ScenarioError):
            self.base(participants=[ParticipantSpec("s", "S", Role.STUDENT)]).validate()

    def test_actions_must_be_sorted(self):
        actions = [
            Action(5.0, "t", "advance"),
            Action(1.0, "t", "advance"),
        ]
        with pytest.raises(ScenarioError):
            self.base(actions=actions).validate()

    def test_action_actor_in_roster(self):
        with pytest.raises(ScenarioError):
            self.base(actions=[Action(1.0, "ghost", "advance")]).validate()

    def test_action_time_in_range(self):
        with pytest.raises(ScenarioError):
            self.base(actions=[Action(99.0, "t", "advance")]).validate()

    def test_quiz_arity_checked(self):
        with pytest.raises(ScenarioError):
            self.base(actions=[Action(1.0, "t", "quiz", {"judgments": [True]})]).validate()

    def test_unknown_bundled_name(self):
        with pytest.raises(ScenarioError):
            load_scenario("does_not_exist")


class TestDyadScenario:
    def test_full_phase_chain(self, dyad_result):
        assert dyad_result.exit_status == 0
        assert dyad_result.phases_seen == [
            "TEACH:1", "TEACH:2", "TEACH:3", "TEACH:4", "TEACH:5", "QUIZ", "DONE",
        ]

    def test_roster_shape(self, dyad_result):
        session = dyad_result.session
        roles = sorted(p.role.value for p in session.roster.values())
        assert roles == ["STUDENT", "TEACHER"]

    def test_script_has_five_kanji(self, dyad_result):
        assert len(dyad_result.session.script.items) == 5

    def test_no_errors_in_clean_run(self, dyad_result):
        assert dyad_result.errors_seen == []

    def test_quiz_recorded(self, dyad_result):
        assert dyad_result.session.quiz is not None
        assert dyad_result.session.quiz.correct == 4

    def test_deterministic_bytes(self, tmp_path, dyad_trace_path):
        out = tmp_path / "again.jsonl"
        run_scenario(load_scenario("lesson_dyad"), record=True, out_path=str(out))
        assert sha256(str(out)) == sha256(dyad_trace_path)

    def test_seed_changes_trace(self, tmp_path, dyad_trace_path):
        out = tmp_path / "other-seed.jsonl"
        run_scenario(load_scenario("lesson_dyad", seed=8), record=True, out_path=str(out))
        assert sha256(str(out)) != sha256(dyad_trace_path)


class TestTrioScenario:
    def test_runs_clean(self):
        result = run_scenario(load_scenario("lesson_trio"))
        assert result.exit_status == 0
        roles = sorted(p.role.value for p in result.session.roster.values())
        assert roles == ["STUDENT", "STUDENT", "STUDENT", "TEACHER"]
        assert result.phases_seen[-1] == "DONE"


class TestRoleGateObserved:
    def test_student_advance_is_recorded_error_not_failure(self):
        scenario = Scenario(
            name="rogue",
            sid="s",
            seed=3,
            duration_s=5.0,
            participants=[
                ParticipantSpec("t", "T", Role.TEACHER),
                ParticipantSpec("s", "S", Role.STUDENT),
            ],
            actions=[Action(1.0, "s", "advance")],
        )
        result = run_scenario(scenario)
        assert result.exit_status == 0
        assert any(e["code"] == "not-teacher" for e in result.errors_seen)
        assert any(e["code"] == "not-teacher" for e in result.clients["s"].errors)

    def test_error_lands_in_trace(self, tmp_path):
        scenario = Scenario(
            name="rogue",
            sid="s",
            seed=3,
            duration_s=5.0,
            participants=[
                ParticipantSpec("t", "T", Role.TEACHER),
                ParticipantSpec("s", "S", Role.STUDENT),
            ],
            actions=[Action(1.0, "s", "advance")],
        )
        out = tmp_path / "rogue.jsonl"
        run_scenario(scenario, record=True, out_path=str(out))
        assert '"not-teacher"' in out.read_text()


class TestClientConvergence:
    def test_all_replicas_match_server(self, dyad_result):
        from pulseboard.protocol import canonical_dumps

        server_digest = canonical_dumps(dyad_result.session.state_digest())
        for client in dyad_result.clients.values():
            assert canonical_dumps(client.replica.state_digest()) == server_digest
            assert client.gap_violations == []

    def test_advisories_flowed_to_teacher_only(self, dyad_result):
        assert dyad_result.clients["teacher"].advisories
        assert not dyad_result.clients["student"].advisories
        assert any(a["advisory"] == "RELAX" for a in dyad_result.clients["teacher"].advisories)

    def test_mutual_frames_flowed(self, dyad_result):
        received = dyad_result.clients["student"].frames_received
        assert received.get(("teacher", "BVP"), 0) > 1000
        assert received.get(("teacher", "SC"), 0) > 100
