"""The shared kanji-writing surface: stroke ops folded into board state.

Ops carry a server-assigned total-order number; folding the same sequenced
op stream from empty always produces the same board, so every replica
converges and a persisted log replays to the live state. Stroke order is
preserved because the i-th STROKE_BEGIN in the total order becomes stroke
index i, which is what lets a student watch kanji stroke order unfold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .errors import InvalidParameterError, OutOfOrderError


class BoardOpKind(str, Enum):
    STROKE_BEGIN = "STROKE_BEGIN"
    STROKE_POINT = "STROKE_POINT"
    STROKE_END = "STROKE_END"
    CLEAR = "CLEAR"


@dataclass(frozen=True)
class BoardOp:
    """One whiteboard operation; seq is absent until the server sequences it."""

    kind: BoardOpKind
    board_id: str
    author: str
    stroke_id: str | None = None
    point: tuple[float, float] | None = None
    t_ms: int = 0
    seq: int | None = None

    def validate(self) -> None:
        needs_point = self.kind in (BoardOpKind.STROKE_BEGIN, BoardOpKind.STROKE_POINT)
        if needs_point:
            if self.point is None:
                raise InvalidParameterError(f"{self.kind.value} requires a point")
            x, y = self.point
            if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                raise InvalidParameterError(f"point {self.point} outside [0,1]^2")
        if self.kind is not BoardOpKind.CLEAR and not self.stroke_id:
            raise InvalidParameterError(f"{self.kind.value} requires a stroke_id")

    def to_wire(self) -> dict:
        payload: dict = {"kind": self.kind.value, "board": self.board_id, "t_ms": self.t_ms}
        if self.stroke_id is not None:
            payload["stroke"] = self.stroke_id
        if self.point is not None:
            payload["point"] = [self.point[0], self.point[1]]
        return payload

    @classmethod
    def from_wire(cls, payload: dict, author: str, seq: int | None = None) -> "BoardOp":
        point = payload.get("point")
        op = cls(
            kind=BoardOpKind(payload["kind"]),
            board_id=payload["board"],
            author=author,
            stroke_id=payload.get("stroke"),
            point=(float(point[0]), float(point[1])) if point is not None else None,
            t_ms=int(payload.get("t_ms", 0)),
            seq=seq,
        )
        op.validate()
        return op


@dataclass
class Stroke:
    stroke_id: str
    author: str
    index: int
    points: list[tuple[float, float]] = field(default_factory=list)
    closed: bool = False

    def to_wire(self) -> dict:
        return {
            "stroke": self.stroke_id,
            "author": self.author,
            "index": self.index,
            "closed": self.closed,
            "points": [[x, y] for x, y in self.points],
        }


class BoardState:
    """Materialized whiteboard contents.

    With ``strict_seq`` (the default) each applied op must carry exactly the
    next sequence number; the session server feeds boards from a log shared
    with other message types and turns this off, keeping only the
    monotonicity check. Orphan POINT/END ops are discarded and recorded, not
    raised: a client bug must not wedge the board.
    """

    def __init__(self, board_id: str, strict_seq: bool = True) -> None:
        self.board_id = board_id
        self.strict_seq = strict_seq
        self.strokes: list[Stroke] = []
        self.last_seq = 0
        self.orphans: list[str] = []
        self._open: dict[tuple[str, str], Stroke] = {}

    def apply_op(self, op: BoardOp) -> "BoardState":
        if op.seq is None:
            raise OutOfOrderError("op has no sequence number")
        if op.seq <= self.last_seq:
            raise OutOfOrderError(f"seq {op.seq} replays or precedes last applied {self.last_seq}")
        if self.strict_seq and op.seq != self.last_seq + 1:
            raise OutOfOrderError(f"seq gap: expected {self.last_seq + 1}, got {op.seq}")
        op.validate()
        self.last_seq = op.seq

        key = (op.author, op.stroke_id or "")
        if op.kind is BoardOpKind.CLEAR:
            self.strokes = []
            self._open = {}
        elif op.kind is BoardOpKind.STROKE_BEGIN:
            if key in self._open:
                self.orphans.append(f"seq {op.seq}: duplicate BEGIN for {key}")
            else:
                stroke = Stroke(op.stroke_id or "", op.author, index=len(self.strokes))
                stroke.points.append(op.point)  # type: ignore[arg-type]
                self.strokes.append(stroke)
                self._open[key] = stroke
        elif op.kind is BoardOpKind.STROKE_POINT:
            stroke = self._open.get(key)
            if stroke is None:
                self.orphans.append(f"seq {op.seq}: POINT without open BEGIN for {key}")
            else:
                stroke.points.append(op.point)  # type: ignore[arg-type]
        elif op.kind is BoardOpKind.STROKE_END:
            stroke = self._open.pop(key, None)
            if stroke is None:
                self.orphans.append(f"seq {op.seq}: END without open BEGIN for {key}")
            else:
                stroke.closed = True
        return self

    def snapshot(self) -> dict:
        return {
            "board": self.board_id,
            "last_seq": self.last_seq,
            "strokes": [s.to_wire() for s in self.strokes],
        }

    def digest(self) -> str:
        """Canonical serialization of the visible contents, for convergence checks."""
        from .protocol import canonical_dumps

        return canonical_dumps({"board": self.board_id, "strokes": [s.to_wire() for s in self.strokes]})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BoardState):
            return NotImplemented
        return self.digest() == other.digest()


def apply_op(state: BoardState, op: BoardOp) -> BoardState:
    """Apply one sequenced op; the fold is deterministic."""
    return state.apply_op(op)


def stroke_count(state: BoardState) -> int:
    """Strokes begun on the current board contents, finished or not."""
    return len(state.strokes)


def replay(board_id: str, ops: Iterable[BoardOp], strict_seq: bool = True) -> BoardState:
    """Fold an op log from an empty board."""
    state = BoardState(board_id, strict_seq=strict_seq)
    for op in ops:
        state.apply_op(op)
    return state
