"""From raw samples to ambient display parameters.

Streams a pulse trace through the sliding-window normalization and the
three linear display maps, then plots the heart-circle radius pulsing
against the raw waveform. The displays are deliberately plain: a red
circle that beats, a blue cylinder that breathes, blue circles that spawn
faster when skin conductance climbs. No emotion labels anywhere, only the
signals themselves.

Run: python demos/02_ambient_display.py
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from pulseboard import DisplayConfig, SignalChannel, SignalFrame, compute_display, gen_bvp, gen_sc

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

cfg = DisplayConfig()  # r in [0.2, 1.0], h in [0.1, 1.0], d up to 8/s, 10 s window
print(f"display config: {cfg}")

bvp = gen_bvp(hr_bpm=70, duration_s=30, rate_hz=32, seed=3)
sc = gen_sc(tonic_us=2.2, scr_events=[(12, 0.6)], duration_s=30, rate_hz=4, seed=3)

frames = [
    SignalFrame("demo", SignalChannel.BVP, i + 1, int(round(t)), v)
    for i, (t, v) in enumerate(bvp.samples)
] + [
    SignalFrame("demo", SignalChannel.SC, i + 1, int(round(t)), v)
    for i, (t, v) in enumerate(sc.samples)
]
frames.sort(key=lambda f: f.t_ms)

times, radii, densities = [], [], []
window: list[SignalFrame] = []
for frame in frames:
    window.append(frame)
    window = [f for f in window if f.t_ms >= frame.t_ms - cfg.window_s * 1000]
    params = compute_display(window, cfg, now_ms=frame.t_ms)
    times.append(frame.t_ms / 1000.0)
    radii.append(params.heart_radius)
    densities.append(params.sweat_density)

print(f"heart radius stays within [{min(radii):.3f}, {max(radii):.3f}] (configured [{cfg.r_min}, {cfg.r_max}])")
print(f"sweat density peaks at {max(densities):.2f} spawns/s after the SCR at t=12 s")

# A channel nobody streams reads neutral, not empty or extreme.
neutral = compute_display([], cfg, now_ms=0, participant_id="demo")
print(f"silent participant renders neutral: lung height {neutral.lung_height:.2f}")

fig, axes = plt.subplots(2, 1, figsize=(10, 5.5), sharex=True)
axes[0].plot(bvp.times_ms() / 1000.0, bvp.values(), linewidth=0.7, label="raw BVP")
axes[0].set_ylabel("BVP (a.u.)")
axes[0].legend(loc="upper right")
axes[1].plot(times, radii, linewidth=0.9, color="tab:red", label="heart radius")
axes[1].plot(times, densities, linewidth=0.9, color="tab:blue", label="sweat density (/s)")
axes[1].set_xlabel("time (s)")
axes[1].legend(loc="upper right")
axes[1].set_xlim(10, 20)
axes[0].set_xlim(10, 20)
fig.suptitle("Raw signal vs ambient display quantities")
fig.tight_layout()
path = OUT / "ambient_display.png"
fig.savefig(path, dpi=110)
print(f"figure saved to {path}")
