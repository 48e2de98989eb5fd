"""Exception types shared across the package.

Each error carries a stable ``code`` string that doubles as the error
identifier on the wire (ERROR envelope payloads) and in CLI reports.
"""


class PulseboardError(Exception):
    code = "error"


class InvalidParameterError(PulseboardError):
    code = "invalid-parameter"


class InsufficientDataError(PulseboardError):
    code = "insufficient-data"


class EmptyWindowError(PulseboardError):
    code = "empty-window"


class UnknownParticipantError(PulseboardError):
    code = "unknown-participant"


class OutOfOrderError(PulseboardError):
    code = "out-of-order"


class NotTeacherError(PulseboardError):
    code = "not-teacher"


class AlreadyDoneError(PulseboardError):
    code = "already-done"


class WrongArityError(PulseboardError):
    code = "wrong-arity"


class WrongPhaseError(PulseboardError):
    code = "wrong-phase"


class DuplicateTeacherError(PulseboardError):
    code = "duplicate-teacher"


class SessionFullError(PulseboardError):
    code = "session-full"


class UnknownSessionError(PulseboardError):
    code = "unknown-session"


class SchemaError(PulseboardError):
    code = "schema"


class ScenarioError(PulseboardError):
    code = "scenario-invalid"


class MalformedTraceError(PulseboardError):
    code = "malformed-trace"


class NoFramesError(PulseboardError):
    code = "no-frames-for-participant"
