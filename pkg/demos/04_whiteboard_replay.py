"""Shared whiteboard: total order, convergence, stroke order.

Builds a sequenced op log for the kanji "三" (three horizontal strokes),
renders it as ASCII, and shows that replaying the log reproduces the live
board exactly - the property every client relies on to converge.

Run: python demos/04_whiteboard_replay.py
"""

from pulseboard import BoardOp, BoardOpKind, BoardState, apply_op, replay, stroke_count


def stroke_ops(board, author, stroke_id, points, first_seq):
    ops = []
    seq = first_seq
    ops.append(BoardOp(BoardOpKind.STROKE_BEGIN, board, author, stroke_id, points[0], seq=seq))
    for point in points[1:]:
        seq += 1
        ops.append(BoardOp(BoardOpKind.STROKE_POINT, board, author, stroke_id, point, seq=seq))
    seq += 1
    ops.append(BoardOp(BoardOpKind.STROKE_END, board, author, stroke_id, seq=seq))
    return ops, seq + 1


# The teacher draws 三: three horizontal strokes, top to bottom.
log: list[BoardOp] = []
seq = 1
for i, y in enumerate((0.25, 0.5, 0.75)):
    width = (0.3, 0.25, 0.2)[i]
    ops, seq = stroke_ops("teacher", "teacher", f"t-s{i+1}", [(width, y), (0.5, y), (1 - width, y)], seq)
    log.extend(ops)

live = BoardState("teacher", strict_seq=True)
for op in log:
    apply_op(live, op)

print(f"live board: {stroke_count(live)} strokes, last seq {live.last_seq}")
print(f"stroke order as drawn: {[s.stroke_id for s in live.strokes]}")


def ascii_render(board: BoardState, width=33, height=11) -> str:
    grid = [[" "] * width for _ in range(height)]
    for stroke in board.strokes:
        for j in range(len(stroke.points) - 1):
            (x0, y0), (x1, y1) = stroke.points[j], stroke.points[j + 1]
            steps = max(abs(int((x1 - x0) * width)), abs(int((y1 - y0) * height)), 1)
            for k in range(steps + 1):
                x = x0 + (x1 - x0) * k / steps
                y = y0 + (y1 - y0) * k / steps
                grid[min(height - 1, int(y * height))][min(width - 1, int(x * width))] = "#"
    return "\n".join("".join(row) for row in grid)


print("\n" + ascii_render(live) + "\n")

replayed = replay("teacher", log)
print(f"replay of the {len(log)}-op log equals the live board: {replayed == live}")

# Orphan ops (a POINT whose BEGIN never arrived) are discarded, not fatal.
tolerant = BoardState("teacher", strict_seq=False)
for op in log:
    apply_op(tolerant, op)
orphan = BoardOp(BoardOpKind.STROKE_POINT, "teacher", "student", "ghost", (0.5, 0.5), seq=99)
apply_op(tolerant, orphan)
print(f"after an orphan op: {stroke_count(tolerant)} strokes, recorded: {tolerant.orphans}")

# CLEAR empties the surface; the log itself is what persists.
clear = BoardOp(BoardOpKind.CLEAR, "teacher", "teacher", seq=100)
apply_op(tolerant, clear)
print(f"after CLEAR: {stroke_count(tolerant)} strokes on the board")
