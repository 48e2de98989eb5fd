"""Wire protocol: envelopes, message types, and canonical JSON encoding.

Every message travels as one JSON object. The canonical encoder fixes key
order (sorted), float formatting (%.6g) and UTF-8 so that two runs of the
same deterministic scenario produce byte-identical traces.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from .errors import SchemaError
from .signals import SignalChannel

PROTOCOL_VERSION = 1

# Message types
JOIN = "JOIN"
SNAPSHOT = "SNAPSHOT"
PRESENCE = "PRESENCE"
SIGNAL_FRAME = "SIGNAL_FRAME"
CONSENT_SET = "CONSENT_SET"
CONSENT_STATE = "CONSENT_STATE"
BOARD_OP = "BOARD_OP"
LESSON_ADVANCE = "LESSON_ADVANCE"
LESSON_STATE = "LESSON_STATE"
QUIZ_JUDGE = "QUIZ_JUDGE"
ADVISORY = "ADVISORY"
ERROR = "ERROR"
PING = "PING"
PONG = "PONG"

MESSAGE_TYPES = frozenset(
    {
        JOIN,
        SNAPSHOT,
        PRESENCE,
        SIGNAL_FRAME,
        CONSENT_SET,
        CONSENT_STATE,
        BOARD_OP,
        LESSON_ADVANCE,
        LESSON_STATE,
        QUIZ_JUDGE,
        ADVISORY,
        ERROR,
        PING,
        PONG,
    }
)

# Types that receive a server sequence number and land in the session log.
SEQUENCED_TYPES = frozenset({PRESENCE, BOARD_OP, CONSENT_STATE, LESSON_STATE, QUIZ_JUDGE})

SERVER_ID = "server"


def format_float(x: float) -> str:
    """Canonical float rendering: %.6g, never NaN/inf."""
    if not math.isfinite(x):
        raise ValueError(f"non-finite float {x!r} cannot be encoded")
    return format(x, ".6g")


def _encode(obj: Any, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _encode(item, out)
        out.append("]")
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise ValueError(f"non-string key {key!r}")
            if i:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(":")
            _encode(obj[key], out)
        out.append("}")
    else:
        raise ValueError(f"cannot canonically encode {type(obj).__name__}")


def canonical_dumps(obj: Any) -> str:
    """Deterministic JSON: sorted keys, %.6g floats, UTF-8, no whitespace."""
    out: list[str] = []
    _encode(obj, out)
    return "".join(out)


@dataclass
class Envelope:
    """One protocol message. ``sender`` maps to the wire key "from"."""

    type: str
    sid: str
    sender: str
    payload: dict = field(default_factory=dict)
    seq: int | None = None
    t_server_ms: int | None = None
    v: int = PROTOCOL_VERSION

    def to_wire(self) -> dict:
        wire: dict = {
            "v": self.v,
            "type": self.type,
            "sid": self.sid,
            "from": self.sender,
            "payload": self.payload,
        }
        if self.seq is not None:
            wire["seq"] = self.seq
        if self.t_server_ms is not None:
            wire["t_server_ms"] = self.t_server_ms
        return wire

    def encode(self) -> str:
        return canonical_dumps(self.to_wire())

    @classmethod
    def from_wire(cls, wire: dict) -> "Envelope":
        if not isinstance(wire, dict):
            raise SchemaError("envelope must be a JSON object")
        for key in ("v", "type", "sid", "from"):
            if key not in wire:
                raise SchemaError(f"envelope missing {key!r}")
        if wire["v"] != PROTOCOL_VERSION:
            raise SchemaError(f"unsupported protocol version {wire['v']!r}")
        mtype = wire["type"]
        if mtype not in MESSAGE_TYPES:
            raise SchemaError(f"unknown message type {mtype!r}")
        payload = wire.get("payload", {})
        if not isinstance(payload, dict):
            raise SchemaError("payload must be an object")
        seq = wire.get("seq")
        if seq is not None and (not isinstance(seq, int) or seq < 1):
            raise SchemaError(f"bad seq {seq!r}")
        return cls(
            type=mtype,
            sid=str(wire["sid"]),
            sender=str(wire["from"]),
            payload=payload,
            seq=seq,
            t_server_ms=wire.get("t_server_ms"),
        )

    @classmethod
    def decode(cls, line: str) -> "Envelope":
        try:
            wire = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from exc
        return cls.from_wire(wire)


def _require(payload: dict, key: str, kinds: tuple[type, ...]) -> Any:
    if key not in payload:
        raise SchemaError(f"payload missing {key!r}")
    value = payload[key]
    if not isinstance(value, kinds) or isinstance(value, bool) and bool not in kinds:
        raise SchemaError(f"payload field {key!r} has wrong type {type(value).__name__}")
    return value


def _require_channel(payload: dict) -> SignalChannel:
    ch = _require(payload, "channel", (str,))
    try:
        return SignalChannel(ch)
    except ValueError as exc:
        raise SchemaError(f"unknown channel {ch!r}") from exc


def validate_payload(mtype: str, payload: dict) -> None:
    """Structural checks per message type; raises SchemaError."""
    if mtype == JOIN:
        _require(payload, "name", (str,))
        role = _require(payload, "role", (str,))
        if role not in ("TEACHER", "STUDENT", "OBSERVER"):
            raise SchemaError(f"unknown role {role!r}")
    elif mtype == SIGNAL_FRAME:
        _require(payload, "participant", (str,))
        _require_channel(payload)
        seq = _require(payload, "seq", (int,))
        if seq < 1:
            raise SchemaError("frame seq must be >= 1")
        t_ms = _require(payload, "t_ms", (int,))
        if t_ms < 0:
            raise SchemaError("frame t_ms must be >= 0")
        value = _require(payload, "value", (int, float))
        if not math.isfinite(float(value)):
            raise SchemaError("frame value must be finite")
    elif mtype == CONSENT_SET:
        _require(payload, "participant", (str,))
        _require_channel(payload)
        _require(payload, "share", (bool,))
    elif mtype == CONSENT_STATE:
        _require(payload, "participant", (str,))
        _require_channel(payload)
        _require(payload, "share", (bool,))
        version = _require(payload, "version", (int,))
        if version < 1:
            raise SchemaError("consent version must be >= 1")
        _require(payload, "flags", (dict,))
    elif mtype == BOARD_OP:
        kind = _require(payload, "kind", (str,))
        if kind not in ("STROKE_BEGIN", "STROKE_POINT", "STROKE_END", "CLEAR"):
            raise SchemaError(f"unknown board op kind {kind!r}")
        _require(payload, "board", (str,))
        if kind != "CLEAR":
            _require(payload, "stroke", (str,))
        if kind in ("STROKE_BEGIN", "STROKE_POINT"):
            point = _require(payload, "point", (list,))
            if len(point) != 2 or not all(isinstance(c, (int, float)) for c in point):
                raise SchemaError("board point must be [x, y]")
            x, y = float(point[0]), float(point[1])
            if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                raise SchemaError(f"board point {point} outside [0,1]^2")
    elif mtype == LESSON_ADVANCE:
        pass
    elif mtype == LESSON_STATE:
        phase = _require(payload, "phase", (str,))
        if phase not in ("INTRO", "TEACH", "QUIZ", "DONE"):
            raise SchemaError(f"unknown phase {phase!r}")
        unit = _require(payload, "unit", (int,))
        if phase == "TEACH" and not 1 <= unit <= 5:
            raise SchemaError(f"TEACH unit out of range: {unit}")
        if phase != "TEACH" and unit != 0:
            raise SchemaError("unit must be 0 outside TEACH")
    elif mtype == QUIZ_JUDGE:
        judgments = _require(payload, "judgments", (list,))
        if len(judgments) != 5 or not all(isinstance(j, bool) for j in judgments):
            raise SchemaError("judgments must be exactly 5 booleans")
    elif mtype == ADVISORY:
        _require(payload, "participant", (str,))
        advisory = _require(payload, "advisory", (str,))
        if advisory not in ("OK", "RELAX"):
            raise SchemaError(f"unknown advisory {advisory!r}")
        _require(payload, "scr_rate", (int, float))
        _require(payload, "threshold", (int, float))
    elif mtype == ERROR:
        _require(payload, "code", (str,))
    elif mtype in (PING, PONG, SNAPSHOT, PRESENCE):
        # PRESENCE payload checked where folded; PING/PONG payloads are free-form.
        if mtype == PRESENCE:
            _require(payload, "participant", (str,))
            event = _require(payload, "event", (str,))
            if event not in ("join", "leave"):
                raise SchemaError(f"unknown presence event {event!r}")
            if event == "join":
                _require(payload, "name", (str,))
                role = _require(payload, "role", (str,))
                if role not in ("TEACHER", "STUDENT", "OBSERVER"):
                    raise SchemaError(f"unknown role {role!r}")
    else:
        raise SchemaError(f"unknown message type {mtype!r}")
