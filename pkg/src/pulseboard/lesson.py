"""Structured lesson state machine: intro, five teaching units, quiz.

Phases advance along a fixed chain under teacher authority only. The
pacing advisory compares skin conductance activity against a threshold; it
informs the teacher and never drives the phase machine itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Sequence

from .errors import (
    AlreadyDoneError,
    InvalidParameterError,
    NotTeacherError,
    WrongArityError,
)

LESSON_UNITS = 5

DEFAULT_SCR_THRESHOLD = 6.0  # events/min


class Role(str, Enum):
    TEACHER = "TEACHER"
    STUDENT = "STUDENT"
    OBSERVER = "OBSERVER"


class PhaseKind(str, Enum):
    INTRO = "INTRO"
    TEACH = "TEACH"
    QUIZ = "QUIZ"
    DONE = "DONE"


@dataclass(frozen=True)
class LessonPhase:
    kind: PhaseKind
    unit: int = 0  # 1..5 for TEACH, 0 otherwise

    def __post_init__(self) -> None:
        if self.kind is PhaseKind.TEACH:
            if not 1 <= self.unit <= LESSON_UNITS:
                raise InvalidParameterError(f"TEACH unit must be 1..{LESSON_UNITS}, got {self.unit}")
        elif self.unit != 0:
            raise InvalidParameterError(f"{self.kind.value} carries no unit")

    @classmethod
    def intro(cls) -> "LessonPhase":
        return cls(PhaseKind.INTRO)

    @classmethod
    def teach(cls, unit: int) -> "LessonPhase":
        return cls(PhaseKind.TEACH, unit)

    @classmethod
    def quiz(cls) -> "LessonPhase":
        return cls(PhaseKind.QUIZ)

    @classmethod
    def done(cls) -> "LessonPhase":
        return cls(PhaseKind.DONE)

    def to_wire(self) -> dict:
        return {"phase": self.kind.value, "unit": self.unit}

    @classmethod
    def from_wire(cls, data: dict) -> "LessonPhase":
        return cls(PhaseKind(data["phase"]), int(data.get("unit", 0)))

    def encode(self) -> str:
        return f"TEACH:{self.unit}" if self.kind is PhaseKind.TEACH else self.kind.value


PHASE_CHAIN: tuple[LessonPhase, ...] = (
    LessonPhase.intro(),
    *(LessonPhase.teach(k) for k in range(1, LESSON_UNITS + 1)),
    LessonPhase.quiz(),
    LessonPhase.done(),
)


def phase_index(phase: LessonPhase) -> int:
    return PHASE_CHAIN.index(phase)


def advance_phase(current: LessonPhase, actor_role: Role) -> LessonPhase:
    """Step to the next phase in the chain; teachers only, DONE is absorbing."""
    if actor_role is not Role.TEACHER:
        raise NotTeacherError("only the teacher advances the lesson")
    if current.kind is PhaseKind.DONE:
        raise AlreadyDoneError("lesson already finished")
    return PHASE_CHAIN[phase_index(current) + 1]


@dataclass(frozen=True)
class KanjiItem:
    label: str
    difficulty: int
    strokes: int


@dataclass(frozen=True)
class LessonScript:
    """Exactly five kanji of strictly increasing difficulty."""

    items: tuple[KanjiItem, ...]
    intro_notes: str = ""

    def __post_init__(self) -> None:
        if len(self.items) != LESSON_UNITS:
            raise InvalidParameterError(f"a lesson script holds exactly {LESSON_UNITS} kanji")
        ranks = [item.difficulty for item in self.items]
        if any(b <= a for a, b in zip(ranks, ranks[1:])):
            raise InvalidParameterError("difficulty ranks must be strictly increasing")

    def to_wire(self) -> dict:
        return {
            "kanji": [
                {"label": i.label, "difficulty": i.difficulty, "strokes": i.strokes}
                for i in self.items
            ],
            "intro_notes": self.intro_notes,
        }

    @classmethod
    def from_wire(cls, data: dict) -> "LessonScript":
        items = tuple(
            KanjiItem(label=str(k["label"]), difficulty=int(k["difficulty"]), strokes=int(k["strokes"]))
            for k in data["kanji"]
        )
        return cls(items=items, intro_notes=str(data.get("intro_notes", "")))


def load_script(path: str) -> LessonScript:
    with open(path, "r", encoding="utf-8") as fh:
        return LessonScript.from_wire(json.load(fh))


def default_script() -> LessonScript:
    """The bundled five-kanji beginner script."""
    raw = resources.files("pulseboard.data").joinpath("lesson_basic.json").read_text("utf-8")
    return LessonScript.from_wire(json.loads(raw))


@dataclass(frozen=True)
class QuizResult:
    judgments: tuple[bool, ...]
    correct: int
    score: float

    def to_wire(self) -> dict:
        return {"judgments": list(self.judgments), "correct": self.correct, "score": self.score}


def score_quiz(judgments: Sequence[bool]) -> QuizResult:
    """Fold the teacher's five per-item judgments into a score."""
    if len(judgments) != LESSON_UNITS:
        raise WrongArityError(f"expected {LESSON_UNITS} judgments, got {len(judgments)}")
    flags = tuple(bool(j) for j in judgments)
    correct = sum(flags)
    return QuizResult(judgments=flags, correct=correct, score=correct / LESSON_UNITS)


class Advisory(str, Enum):
    OK = "OK"
    RELAX = "RELAX"


@dataclass(frozen=True)
class PacingAdvisory:
    advisory: Advisory
    scr_rate: float
    threshold: float

    def to_wire(self) -> dict:
        return {"advisory": self.advisory.value, "scr_rate": self.scr_rate, "threshold": self.threshold}


def pacing_advisory(scr_rate: float, threshold: float) -> PacingAdvisory:
    """RELAX strictly above the threshold, OK otherwise. Advisory only."""
    if scr_rate < 0:
        raise InvalidParameterError("scr_rate must be >= 0")
    if threshold <= 0:
        raise InvalidParameterError("threshold must be positive")
    verdict = Advisory.RELAX if scr_rate > threshold else Advisory.OK
    return PacingAdvisory(advisory=verdict, scr_rate=scr_rate, threshold=threshold)
