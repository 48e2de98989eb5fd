"""Maps normalized signal values to the three ambient display quantities.

BVP drives the radius of a red circle (a beating heart), respiration the
height of a blue cylinder (an expanding lung), and skin conductance the
spawn density of expanding blue circles (perspiring skin). Only continuous
quantities are exposed; the module never produces discrete emotion labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import EmptyWindowError, InvalidParameterError
from .signals import SignalChannel, SignalFrame, normalize_window

NEUTRAL_NORM = 0.5

CSV_HEADER = "t_ms,participant,heart_radius,lung_height,sweat_density"


@dataclass(frozen=True)
class DisplayConfig:
    """Output ranges for the three displays plus the normalization window."""

    r_min: float = 0.2
    r_max: float = 1.0
    h_min: float = 0.1
    h_max: float = 1.0
    d_max: float = 8.0
    window_s: float = 10.0

    def __post_init__(self) -> None:
        if not self.r_min < self.r_max:
            raise InvalidParameterError("r_min must be < r_max")
        if not self.h_min < self.h_max:
            raise InvalidParameterError("h_min must be < h_max")
        if self.d_max <= 0:
            raise InvalidParameterError("d_max must be positive")
        if self.window_s <= 0:
            raise InvalidParameterError("window_s must be positive")

    def to_wire(self) -> dict:
        return {
            "r_min": self.r_min,
            "r_max": self.r_max,
            "h_min": self.h_min,
            "h_max": self.h_max,
            "d_max": self.d_max,
            "window_s": self.window_s,
        }

    @classmethod
    def from_wire(cls, data: dict) -> "DisplayConfig":
        return cls(**{k: float(data[k]) for k in ("r_min", "r_max", "h_min", "h_max", "d_max", "window_s")})


@dataclass(frozen=True)
class DisplayParams:
    """Renderer-agnostic ambient display state for one participant."""

    participant_id: str
    t_ms: int
    heart_radius: float
    lung_height: float
    sweat_density: float

    def csv_row(self) -> str:
        from .protocol import format_float

        return ",".join(
            [
                str(self.t_ms),
                self.participant_id,
                format_float(self.heart_radius),
                format_float(self.lung_height),
                format_float(self.sweat_density),
            ]
        )


def _check_norm(norm: float) -> None:
    if not 0.0 <= norm <= 1.0:
        raise InvalidParameterError(f"normalized value must be in [0, 1], got {norm}")


def map_bvp(norm: float, cfg: DisplayConfig) -> float:
    """Heart-circle radius: linear in the normalized BVP value."""
    _check_norm(norm)
    return cfg.r_min + norm * (cfg.r_max - cfg.r_min)


def map_resp(norm: float, cfg: DisplayConfig) -> float:
    """Lung-cylinder height: linear in the normalized respiration value."""
    _check_norm(norm)
    return cfg.h_min + norm * (cfg.h_max - cfg.h_min)


def map_sc(norm: float, cfg: DisplayConfig) -> float:
    """Sweat-circle spawn density (expected spawns per second)."""
    _check_norm(norm)
    return norm * cfg.d_max


def compute_display(
    frames: Sequence[SignalFrame],
    cfg: DisplayConfig,
    now_ms: int,
    participant_id: str | None = None,
) -> DisplayParams:
    """Fold recent frames of one participant into DisplayParams.

    Per channel: sliding-window normalization over cfg.window_s, then the
    channel's linear map. A channel with no frames inside the window reads
    neutral (norm 0.5) so a silent channel looks calm, not extreme.
    """
    if participant_id is None:
        participant_id = frames[0].participant_id if frames else ""

    norms = {ch: NEUTRAL_NORM for ch in SignalChannel}
    for ch in SignalChannel:
        samples = [(float(f.t_ms), f.value) for f in frames if f.channel is ch and f.t_ms <= now_ms]
        if not samples:
            continue
        try:
            norms[ch] = normalize_window(samples, cfg.window_s, now_ms)
        except EmptyWindowError:
            pass

    return DisplayParams(
        participant_id=participant_id,
        t_ms=int(now_ms),
        heart_radius=map_bvp(norms[SignalChannel.BVP], cfg),
        lung_height=map_resp(norms[SignalChannel.RESP], cfg),
        sweat_density=map_sc(norms[SignalChannel.SC], cfg),
    )
