"""Shared-whiteboard teaching sessions with reciprocal physiological displays.

The package models three cooperating concerns: physiological signal
streams (synthetic, since no hardware is attached), their ambient display
mapping, and a reciprocity rule that makes one-way vital-sign flows
impossible. Around them sit a shared kanji whiteboard, a structured lesson
state machine, an authoritative session server with two transport
bindings, and a deterministic simulation/replay harness.
"""

from .config import ServerConfig, load_config
from .display import DisplayConfig, DisplayParams, compute_display, map_bvp, map_resp, map_sc
from .lesson import (
    Advisory,
    KanjiItem,
    LessonPhase,
    LessonScript,
    PacingAdvisory,
    QuizResult,
    Role,
    advance_phase,
    default_script,
    load_script,
    pacing_advisory,
    score_quiz,
)
from .protocol import Envelope, canonical_dumps
from .reciprocity import (
    ConsentState,
    DeliveryDecision,
    DeliveryReason,
    filter_frame,
    may_deliver,
    set_consent,
)
from .server import Participant, Session, SessionHub, SessionReplica, replay_log
from .signals import (
    SignalChannel,
    SignalFrame,
    SignalTrace,
    detect_pulse_rate,
    detect_scr_events,
    detect_scr_rate,
    gen_bvp,
    gen_resp,
    gen_sc,
    normalize_window,
    read_trace_jsonl,
    write_trace_jsonl,
)
from .sim import Scenario, SimResult, load_scenario, run_scenario
from .trace import check_trace, emit_display_csv, read_trace
from .whiteboard import BoardOp, BoardOpKind, BoardState, Stroke, apply_op, replay, stroke_count

__version__ = "0.1.0"

__all__ = [
    "Advisory",
    "BoardOp",
    "BoardOpKind",
    "BoardState",
    "ConsentState",
    "DeliveryDecision",
    "DeliveryReason",
    "DisplayConfig",
    "DisplayParams",
    "Envelope",
    "KanjiItem",
    "LessonPhase",
    "LessonScript",
    "PacingAdvisory",
    "Participant",
    "QuizResult",
    "Role",
    "Scenario",
    "ServerConfig",
    "Session",
    "SessionHub",
    "SessionReplica",
    "SignalChannel",
    "SignalFrame",
    "SignalTrace",
    "SimResult",
    "Stroke",
    "advance_phase",
    "apply_op",
    "canonical_dumps",
    "check_trace",
    "compute_display",
    "default_script",
    "detect_pulse_rate",
    "detect_scr_events",
    "detect_scr_rate",
    "emit_display_csv",
    "filter_frame",
    "gen_bvp",
    "gen_resp",
    "gen_sc",
    "load_config",
    "load_scenario",
    "load_script",
    "map_bvp",
    "map_resp",
    "map_sc",
    "may_deliver",
    "normalize_window",
    "pacing_advisory",
    "read_trace",
    "read_trace_jsonl",
    "replay",
    "replay_log",
    "run_scenario",
    "score_quiz",
    "set_consent",
    "stroke_count",
    "write_trace_jsonl",
]
