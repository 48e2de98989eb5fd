from __future__ import annotations

import json

import pytest

from pulseboard.errors import (
    AlreadyDoneError,
    InvalidParameterError,
    NotTeacherError,
    WrongArityError,
)
from pulseboard.lesson import (
    Advisory,
    KanjiItem,
    LessonPhase,
    LessonScript,
    PHASE_CHAIN,
    PhaseKind,
    Role,
    advance_phase,
    default_script,
    load_script,
    pacing_advisory,
    score_quiz,
)


class TestPhaseChain:
    def test_intro_advances_to_first_unit(self):
        assert advance_phase(LessonPhase.intro(), Role.TEACHER) == LessonPhase.teach(1)

    def test_last_unit_advances_to_quiz(self):
        assert advance_phase(LessonPhase.teach(5), Role.TEACHER) == LessonPhase.quiz()

    def test_student_cannot_advance(self):
        for phase in PHASE_CHAIN[:-1]:
            with pytest.raises(NotTeacherError):
                advance_phase(phase, Role.STUDENT)
            with pytest.raises(NotTeacherError):
                advance_phase(phase, Role.OBSERVER)

    def test_done_is_absorbing(self):
        with pytest.raises(AlreadyDoneError):
            advance_phase(LessonPhase.done(), Role.TEACHER)

    def test_exhaustive_walk_never_skips(self):
        # The only reachable trajectory is the 8-state chain itself.
        phase = LessonPhase.intro()
        visited = [phase]
        while phase.kind is not PhaseKind.DONE:
            phase = advance_phase(phase, Role.TEACHER)
            visited.append(phase)
        assert visited == list(PHASE_CHAIN)
        assert len(visited) == 8

    def test_wire_round_trip(self):
        for phase in PHASE_CHAIN:
            assert LessonPhase.from_wire(phase.to_wire()) == phase

    def test_unit_validation(self):
        with pytest.raises(InvalidParameterError):
            LessonPhase(PhaseKind.TEACH, 6)
        with pytest.raises(InvalidParameterError):
            LessonPhase(PhaseKind.INTRO, 1)


class TestPacingAdvisory:
    def test_quiet_is_ok(self):
        assert pacing_advisory(0, 6).advisory is Advisory.OK

    def test_excessive_is_relax(self):
        assert pacing_advisory(10, 6).advisory is Advisory.RELAX

    def test_threshold_is_strict(self):
        assert pacing_advisory(6, 6).advisory is Advisory.OK

    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            pacing_advisory(-1, 6)
        with pytest.raises(InvalidParameterError):
            pacing_advisory(3, 0)

    def test_pure(self):
        first = pacing_advisory(7.5, 6)
        second = pacing_advisory(7.5, 6)
        assert first == second


class TestScoreQuiz:
    @pytest.mark.parametrize(
        "judgments,correct",
        [([True] * 5, 5), ([False] * 5, 0), ([True, False, True, False, True], 3)],
    )
    def test_scoring(self, judgments, correct):
        result = score_quiz(judgments)
        assert result.correct == correct
        assert result.score == pytest.approx(correct / 5)

    @pytest.mark.parametrize("n", [0, 4, 6])
    def test_arity(self, n):
        with pytest.raises(WrongArityError):
            score_quiz([True] * n)


class TestLessonScript:
    def test_default_script_is_valid(self):
        script = default_script()
        assert len(script.items) == 5
        ranks = [i.difficulty for i in script.items]
        assert ranks == sorted(ranks) and len(set(ranks)) == 5

    def test_exactly_five_items(self):
        items = tuple(KanjiItem(f"k{i}", i + 1, 1) for i in range(4))
        with pytest.raises(InvalidParameterError):
            LessonScript(items=items)

    def test_difficulty_strictly_increasing(self):
        items = tuple(KanjiItem(f"k{i}", 1, 1) for i in range(5))
        with pytest.raises(InvalidParameterError):
            LessonScript(items=items)

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text(
            json.dumps(
                {
                    "kanji": [
                        {"label": "一", "difficulty": 1, "strokes": 1},
                        {"label": "二", "difficulty": 2, "strokes": 2},
                        {"label": "三", "difficulty": 3, "strokes": 3},
                        {"label": "口", "difficulty": 4, "strokes": 3},
                        {"label": "日", "difficulty": 5, "strokes": 4},
                    ]
                }
            ),
            encoding="utf-8",
        )
        script = load_script(str(path))
        assert script.items[0].label == "一"
        assert script.items[4].strokes == 4
