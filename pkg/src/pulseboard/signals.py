"""Physiological channels, frames, and synthetic signal sources.

Three channels are modeled: blood volume pulse (BVP), respiration (RESP,
normalized chest expansion) and skin conductance (SC, microsiemens).
Generators replace hardware sensors; they are pure functions of their
arguments including the seed, so traces are reproducible everywhere.
Analysis is deliberately minimal: pulse-rate from peak spacing, SCR
activity from first-difference threshold crossings, and sliding-window
normalization feeding the ambient displays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyWindowError,
    InsufficientDataError,
    InvalidParameterError,
    MalformedTraceError,
)

# Sampling defaults; chosen inside typical physiological bands.
DEFAULT_RATES = {"BVP": 32.0, "RESP": 8.0, "SC": 4.0}

# SCR kinetics (seconds): standard electrodermal response shape.
SCR_TAU_RISE = 1.0
SCR_TAU_DECAY = 4.0
SCR_REFRACTORY_S = 2.0

# Minimum spacing between counted cardiac peaks (seconds).
PEAK_MIN_SEPARATION_S = 0.25


class SignalChannel(str, Enum):
    """The three physiological channels carried by the platform."""

    BVP = "BVP"
    RESP = "RESP"
    SC = "SC"


@dataclass(frozen=True)
class SignalFrame:
    """One timestamped sample of one channel from one participant."""

    participant_id: str
    channel: SignalChannel
    seq: int
    t_ms: int
    value: float

    def validate(self) -> None:
        if not math.isfinite(self.value):
            raise InvalidParameterError(f"frame value not finite: {self.value!r}")
        if self.seq < 1:
            raise InvalidParameterError(f"frame seq must be >= 1, got {self.seq}")
        if self.t_ms < 0:
            raise InvalidParameterError(f"frame t_ms must be >= 0, got {self.t_ms}")


@dataclass
class SignalTrace:
    """An equally-spaced sampled signal for one channel."""

    channel: SignalChannel
    rate_hz: float
    samples: list[tuple[float, float]] = field(default_factory=list)
    seed: int | None = None

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        """Nominal trace duration (sample count over rate)."""
        return self.n / self.rate_hz

    def times_ms(self) -> np.ndarray:
        return np.array([t for t, _ in self.samples], dtype=float)

    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.samples], dtype=float)


def _sample_times_s(duration_s: float, rate_hz: float) -> np.ndarray:
    n = int(round(duration_s * rate_hz))
    if n < 1:
        raise InvalidParameterError("duration too short for sampling rate")
    return np.arange(n) / rate_hz


def _as_trace(channel: SignalChannel, t_s: np.ndarray, v: np.ndarray, rate_hz: float, seed: int) -> SignalTrace:
    samples = [(float(t) * 1000.0, float(x)) for t, x in zip(t_s, v)]
    return SignalTrace(channel=channel, rate_hz=float(rate_hz), samples=samples, seed=seed)


def gen_bvp(hr_bpm: float, duration_s: float, rate_hz: float = 32.0, seed: int = 0) -> SignalTrace:
    """Synthesize a blood volume pulse trace at a fixed heart rate.

    Each cardiac period holds a half-sine systolic peak (width 0.3 of the
    period) plus a dicrotic bump at relative amplitude 0.2 riding the
    systolic decay, with per-beat amplitude jitter of +-5%. The waveform
    has exactly one dominant local maximum per period.
    """
    if not 30.0 <= hr_bpm <= 200.0:
        raise InvalidParameterError(f"hr_bpm must be in [30, 200], got {hr_bpm}")
    if duration_s <= 0:
        raise InvalidParameterError("duration_s must be positive")
    if rate_hz < 4.0 * hr_bpm / 60.0:
        raise InvalidParameterError(
            f"rate_hz {rate_hz} below Nyquist-safe floor {4.0 * hr_bpm / 60.0:.2f} for {hr_bpm} bpm"
        )

    period = 60.0 / hr_bpm
    t = _sample_times_s(duration_s, rate_hz)
    rng = np.random.default_rng(seed)
    n_beats = int(math.ceil(duration_s / period)) + 1
    amps = 1.0 + 0.05 * rng.uniform(-1.0, 1.0, n_beats)

    phase = (t % period) / period
    beat = np.minimum((t // period).astype(int), n_beats - 1)
    a = amps[beat]

    syst = np.where(phase < 0.3, np.sin(np.pi * np.clip(phase, 0.0, 0.3) / 0.3), 0.0)
    # Bump placed at phase [0.22, 0.34]: its rise never outruns the systolic
    # fall, so the sum stays strictly decreasing past the main peak.
    in_dicr = (phase >= 0.22) & (phase <= 0.34)
    dicr = np.where(in_dicr, 0.2 * np.sin(np.pi * (phase - 0.22) / 0.12), 0.0)
    v = a * (syst + dicr)
    return _as_trace(SignalChannel.BVP, t, v, rate_hz, seed)


def gen_resp(breaths_per_min: float, duration_s: float, rate_hz: float = 8.0, seed: int = 0) -> SignalTrace:
    """Synthesize a respiration trace: raised sinusoid in [0, 1].

    Breath periods carry seeded jitter of +-5% around 60/breaths_per_min
    seconds; the phase accumulates across breaths so the signal stays
    continuous.
    """
    if not 4.0 <= breaths_per_min <= 60.0:
        raise InvalidParameterError(f"breaths_per_min must be in [4, 60], got {breaths_per_min}")
    if rate_hz < 2.0:
        raise InvalidParameterError("rate_hz must be >= 2")
    if duration_s <= 0:
        raise InvalidParameterError("duration_s must be positive")

    base_period = 60.0 / breaths_per_min
    t = _sample_times_s(duration_s, rate_hz)
    rng = np.random.default_rng(seed)

    starts = [0.0]
    while starts[-1] < duration_s:
        jitter = 1.0 + 0.05 * rng.uniform(-1.0, 1.0)
        starts.append(starts[-1] + base_period * jitter)
    starts_arr = np.array(starts)

    idx = np.clip(np.searchsorted(starts_arr, t, side="right") - 1, 0, len(starts_arr) - 2)
    local = (t - starts_arr[idx]) / (starts_arr[idx + 1] - starts_arr[idx])
    v = 0.5 - 0.5 * np.cos(2.0 * np.pi * local)
    return _as_trace(SignalChannel.RESP, t, np.clip(v, 0.0, 1.0), rate_hz, seed)


def gen_sc(
    tonic_us: float,
    scr_events: Sequence[tuple[float, float]],
    duration_s: float,
    rate_hz: float = 4.0,
    seed: int = 0,
) -> SignalTrace:
    """Synthesize a skin conductance trace: tonic level, slow drift, SCRs.

    Each event (t0, amplitude) contributes
    a * (1 - exp(-(t-t0)/tau_rise)) * exp(-(t-t0)/tau_decay) for t >= t0
    with tau_rise = 1 s and tau_decay = 4 s. Drift is a seeded low-frequency
    sinusoid bounded below 2% of tonic per minute.
    """
    if tonic_us <= 0:
        raise InvalidParameterError("tonic_us must be positive")
    if duration_s <= 0:
        raise InvalidParameterError("duration_s must be positive")
    if rate_hz <= 0:
        raise InvalidParameterError("rate_hz must be positive")
    for t0, amp in scr_events:
        if not 0.0 <= t0 <= duration_s:
            raise InvalidParameterError(f"event time {t0} outside [0, {duration_s}]")
        if amp <= 0:
            raise InvalidParameterError(f"event amplitude must be positive, got {amp}")

    t = _sample_times_s(duration_s, rate_hz)
    rng = np.random.default_rng(seed)
    # 5-minute sinusoid at <= 1% tonic amplitude keeps the rate <= 1.26%/min.
    drift_amp = tonic_us * 0.01 * (0.5 + 0.5 * rng.uniform())
    drift_phase = rng.uniform(0.0, 2.0 * np.pi)
    v = tonic_us + drift_amp * np.sin(2.0 * np.pi * t / 300.0 + drift_phase)

    for t0, amp in scr_events:
        dt = t - t0
        mask = dt >= 0
        v = v + np.where(
            mask,
            amp * (1.0 - np.exp(-np.clip(dt, 0.0, None) / SCR_TAU_RISE)) * np.exp(-np.clip(dt, 0.0, None) / SCR_TAU_DECAY),
            0.0,
        )
    return _as_trace(SignalChannel.SC, t, v, rate_hz, seed)


def _peak_indices(values: np.ndarray) -> np.ndarray:
    """Interior local maxima: strictly above the left neighbor, at least the right."""
    if len(values) < 3:
        return np.array([], dtype=int)
    left = values[1:-1] > values[:-2]
    right = values[1:-1] >= values[2:]
    return np.nonzero(left & right)[0] + 1


def detect_pulse_rate(trace: SignalTrace) -> float:
    """Estimate pulse rate (bpm) from peak spacing in a BVP trace.

    Peaks are local maxima above the trace mean separated by at least
    0.25 s; the rate is 60 * (peaks - 1) / span between first and last.
    """
    if trace.channel is not SignalChannel.BVP:
        raise InvalidParameterError(f"detect_pulse_rate needs a BVP trace, got {trace.channel.value}")
    if trace.duration_s < 10.0:
        raise InvalidParameterError("trace must cover at least 10 s")

    values = trace.values()
    times_s = trace.times_ms() / 1000.0
    mean = float(values.mean())
    candidates = [i for i in _peak_indices(values) if values[i] > mean]

    kept: list[int] = []
    for i in candidates:
        if not kept or times_s[i] - times_s[kept[-1]] >= PEAK_MIN_SEPARATION_S:
            kept.append(i)
    if len(kept) < 2:
        raise InsufficientDataError("fewer than 2 peaks found")
    span_s = times_s[kept[-1]] - times_s[kept[0]]
    return 60.0 * (len(kept) - 1) / span_s


def detect_scr_events(trace: SignalTrace, slope_threshold_us_per_s: float) -> list[float]:
    """Times (s) where the SC first-difference crosses the slope threshold upward.

    A 2 s refractory window keeps each response counted once.
    """
    if trace.channel is not SignalChannel.SC:
        raise InvalidParameterError(f"detect_scr_events needs an SC trace, got {trace.channel.value}")
    if slope_threshold_us_per_s <= 0:
        raise InvalidParameterError("slope threshold must be positive")
    if trace.duration_s < 10.0:
        raise InvalidParameterError("trace must cover at least 10 s")

    values = trace.values()
    times_s = trace.times_ms() / 1000.0
    slope = np.diff(values) * trace.rate_hz

    events: list[float] = []
    last = -math.inf
    for i, s in enumerate(slope):
        prev = slope[i - 1] if i > 0 else -math.inf
        if s >= slope_threshold_us_per_s and prev < slope_threshold_us_per_s:
            t = float(times_s[i])
            if t - last >= SCR_REFRACTORY_S:
                events.append(t)
                last = t
    return events


def detect_scr_rate(trace: SignalTrace, slope_threshold_us_per_s: float) -> float:
    """Skin conductance response activity in events per minute."""
    events = detect_scr_events(trace, slope_threshold_us_per_s)
    return 60.0 * len(events) / trace.duration_s


def normalize_window(
    samples: Sequence[tuple[float, float]],
    window_s: float,
    now_ms: float | None = None,
) -> float:
    """Min-max normalize the newest value over a trailing window.

    ``samples`` are (t_ms, value) pairs sorted by time. Returns
    (v_now - min) / (max - min) over the window, or 0.5 when the window
    has zero range.
    """
    if window_s <= 0:
        raise InvalidParameterError("window_s must be positive")
    if not samples:
        raise EmptyWindowError("no samples")
    horizon = samples[-1][0] if now_ms is None else now_ms
    window = [(t, v) for t, v in samples if horizon - window_s * 1000.0 <= t <= horizon]
    if not window:
        raise EmptyWindowError("no samples inside window")
    v_now = window[-1][1]
    lo = min(v for _, v in window)
    hi = max(v for _, v in window)
    if hi == lo:
        return 0.5
    return (v_now - lo) / (hi - lo)


def write_trace_jsonl(trace: SignalTrace, path: str) -> None:
    """Write a trace as JSON Lines: a meta header then one sample per line."""
    from .protocol import canonical_dumps

    with open(path, "w", encoding="utf-8") as fh:
        meta = {"channel": trace.channel.value, "rate_hz": trace.rate_hz}
        if trace.seed is not None:
            meta["seed"] = trace.seed
        fh.write(canonical_dumps({"meta": meta}) + "\n")
        for t_ms, v in trace.samples:
            fh.write(canonical_dumps({"ch": trace.channel.value, "t_ms": t_ms, "v": v}) + "\n")


def read_trace_jsonl(path: str) -> SignalTrace:
    """Read a trace written by :func:`write_trace_jsonl`."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in (raw.strip() for raw in fh) if ln]
    if not lines:
        raise MalformedTraceError("empty trace file")
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise MalformedTraceError(f"bad header line: {exc}") from exc
    if "meta" not in head:
        raise MalformedTraceError("first line must carry trace meta")
    meta = head["meta"]
    try:
        channel = SignalChannel(meta["channel"])
        rate_hz = float(meta["rate_hz"])
    except (KeyError, ValueError) as exc:
        raise MalformedTraceError(f"bad trace meta: {exc}") from exc
    samples: list[tuple[float, float]] = []
    for i, ln in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(ln)
            samples.append((float(rec["t_ms"]), float(rec["v"])))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MalformedTraceError(f"bad sample on line {i}: {exc}") from exc
    return SignalTrace(channel=channel, rate_hz=rate_hz, samples=samples, seed=meta.get("seed"))
