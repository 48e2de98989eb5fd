"""Server/session configuration with JSON file loading."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .display import DisplayConfig
from .errors import InvalidParameterError
from .lesson import DEFAULT_SCR_THRESHOLD
from .signals import DEFAULT_RATES


@dataclass
class ServerConfig:
    port: int = 8700
    ws_port: int = 8701
    boards: tuple[str, ...] = ("teacher", "student")
    max_teachers: int = 1
    max_students: int = 3
    max_observers: int = 2
    signal_rates: dict = field(default_factory=lambda: dict(DEFAULT_RATES))
    display: DisplayConfig = field(default_factory=DisplayConfig)
    scr_threshold: float = DEFAULT_SCR_THRESHOLD
    scr_slope_threshold: float = 0.05  # uS/s, SCR event detection
    advisory_banner: bool = True
    advisory_window_s: float = 30.0
    advisory_interval_s: float = 2.0
    queue_limit: int = 1024

    def __post_init__(self) -> None:
        if not self.boards:
            raise InvalidParameterError("at least one board is required")
        if self.max_teachers != 1:
            raise InvalidParameterError("sessions have exactly one teacher slot")
        if self.max_students < 1:
            raise InvalidParameterError("at least one student slot is required")
        if self.scr_threshold <= 0:
            raise InvalidParameterError("scr_threshold must be positive")

    def to_wire(self) -> dict:
        return {
            "port": self.port,
            "ws_port": self.ws_port,
            "boards": list(self.boards),
            "roster": {
                "teachers": self.max_teachers,
                "students": self.max_students,
                "observers": self.max_observers,
            },
            "signal_rates": dict(self.signal_rates),
            "display": self.display.to_wire(),
            "scr_threshold": self.scr_threshold,
            "scr_slope_threshold": self.scr_slope_threshold,
            "advisory_banner": self.advisory_banner,
            "advisory_window_s": self.advisory_window_s,
            "advisory_interval_s": self.advisory_interval_s,
            "queue_limit": self.queue_limit,
        }

    @classmethod
    def from_wire(cls, data: dict) -> "ServerConfig":
        roster = data.get("roster", {})
        kwargs: dict = {}
        if "port" in data:
            kwargs["port"] = int(data["port"])
        if "ws_port" in data:
            kwargs["ws_port"] = int(data["ws_port"])
        if "boards" in data:
            kwargs["boards"] = tuple(str(b) for b in data["boards"])
        if "teachers" in roster:
            kwargs["max_teachers"] = int(roster["teachers"])
        if "students" in roster:
            kwargs["max_students"] = int(roster["students"])
        if "observers" in roster:
            kwargs["max_observers"] = int(roster["observers"])
        if "signal_rates" in data:
            kwargs["signal_rates"] = {str(k): float(v) for k, v in data["signal_rates"].items()}
        if "display" in data:
            kwargs["display"] = DisplayConfig.from_wire(data["display"])
        if "scr_threshold" in data:
            kwargs["scr_threshold"] = float(data["scr_threshold"])
        if "scr_slope_threshold" in data:
            kwargs["scr_slope_threshold"] = float(data["scr_slope_threshold"])
        if "advisory_banner" in data:
            kwargs["advisory_banner"] = bool(data["advisory_banner"])
        if "advisory_window_s" in data:
            kwargs["advisory_window_s"] = float(data["advisory_window_s"])
        if "advisory_interval_s" in data:
            kwargs["advisory_interval_s"] = float(data["advisory_interval_s"])
        if "queue_limit" in data:
            kwargs["queue_limit"] = int(data["queue_limit"])
        return cls(**kwargs)


def load_config(path: str) -> ServerConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return ServerConfig.from_wire(json.load(fh))
