"""Synthetic pulse-modulated RGB traces with matching ground-truth PPG.

The generator is the verification oracle for the whole pipeline: every
output is a deterministic function of the spec (including its seed), the
trace and the PPG share one analytically integrated phase, and rendered
videos reproduce the trace in their full-frame spatial means up to 8-bit
quantization.

The channel model is

    c(t) = baseline_c * (1 + pulse_amp_c * p(t) + flicker(t))
           + spikes(t) + gaussian(noise_std)

with p(t) = sin(phase(t)) plus an optional second harmonic accumulated from
the instantaneous heart rate. Multiplicative flicker modulates all channels
identically, which is exactly the component the chrominance projections
cancel.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from . import ingest
from .errors import SpecError
from .ingest import DEFAULT_PPG_RATE_HZ, GroundTruthPpg
from .trace import ChannelTrace

# Relative per-channel pulse strengths (green strongest), scaled by
# SynthSpec.pulse_strength when no explicit triple is given.
CHANNEL_PULSE_WEIGHTS = (0.33, 0.77, 0.53)

GENERATOR_ID = "numpy.random.default_rng/PCG64"

HR_MIN_BPM = 42.0
HR_MAX_BPM = 240.0


@dataclass(frozen=True)
class Flicker:
    """Multiplicative illumination modulation shared by all channels."""

    kind: str = "none"  # none | sinusoidal | random_walk
    amp: float = 0.0
    freq_hz: float = 0.25
    step: float = 0.01

    @classmethod
    def none(cls) -> "Flicker":
        return cls()

    @classmethod
    def sinusoidal(cls, freq_hz: float, amp: float) -> "Flicker":
        return cls(kind="sinusoidal", amp=amp, freq_hz=freq_hz)

    @classmethod
    def random_walk(cls, step: float, amp: float) -> "Flicker":
        return cls(kind="random_walk", amp=amp, step=step)


@dataclass(frozen=True)
class MotionSpikes:
    """Short additive bumps on all channels at seeded random positions."""

    count: int = 0
    magnitude: float = 0.0


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic recording.

    hr_bpm is either a constant or a (start, end) pair for a linear ramp
    over the full duration. When pulse_amp is None it defaults to
    pulse_strength times the conventional channel weights.
    """

    duration_s: float
    hr_bpm: float | tuple[float, float] = 72.0
    fps: float = 20.0
    pulse_strength: float = 0.01
    pulse_amp: tuple[float, float, float] | None = None
    flicker: Flicker = field(default_factory=Flicker.none)
    noise_std: float = 0.0
    baseline_rgb: tuple[float, float, float] = (0.60, 0.50, 0.42)
    motion_spikes: MotionSpikes = field(default_factory=MotionSpikes)
    second_harmonic: float = 0.0
    seed: int = 0

    @property
    def hr_range(self) -> tuple[float, float]:
        if isinstance(self.hr_bpm, (int, float)):
            return float(self.hr_bpm), float(self.hr_bpm)
        start, end = self.hr_bpm
        return float(start), float(end)

    @property
    def resolved_pulse_amp(self) -> tuple[float, float, float]:
        if self.pulse_amp is not None:
            return self.pulse_amp
        return tuple(w * self.pulse_strength for w in CHANNEL_PULSE_WEIGHTS)

    def validate(self) -> None:
        """Raise SpecError when any invariant is violated."""
        if not self.duration_s > 0:
            raise SpecError("duration_s must be > 0")
        if not self.fps > 0:
            raise SpecError("fps must be > 0")
        for hr in self.hr_range:
            if not HR_MIN_BPM <= hr <= HR_MAX_BPM:
                raise SpecError(
                    f"hr {hr} bpm outside [{HR_MIN_BPM}, {HR_MAX_BPM}]"
                )
        if self.flicker.kind not in ("none", "sinusoidal", "random_walk"):
            raise SpecError(f"unknown flicker kind {self.flicker.kind!r}")
        if self.noise_std < 0:
            raise SpecError("noise_std must be >= 0")
        amps = self.resolved_pulse_amp
        harmonic = 1.0 + abs(self.second_harmonic)
        spike = abs(self.motion_spikes.magnitude) if self.motion_spikes.count else 0.0
        for base, amp in zip(self.baseline_rgb, amps):
            if not 0.0 < base < 1.0:
                raise SpecError(f"baseline {base} outside (0, 1)")
            swing = base * (abs(amp) * harmonic + abs(self.flicker.amp))
            margin = swing + spike + 6.0 * self.noise_std
            if base + margin >= 1.0 or base - margin <= 0.0:
                raise SpecError(
                    f"baseline {base} with modulation swing {margin:.4f} leaves (0, 1)"
                )


def _phase(spec: SynthSpec, t: np.ndarray) -> np.ndarray:
    """Accumulated pulse phase: 2*pi * integral of hr(tau)/60 dtau.

    Integrated analytically so the trace and the 256 Hz PPG stay aligned.
    """
    start, end = spec.hr_range
    cycles = start * t + (end - start) * t**2 / (2.0 * spec.duration_s)
    return 2.0 * np.pi * cycles / 60.0


def _pulse_waveform(spec: SynthSpec, t: np.ndarray) -> np.ndarray:
    phase = _phase(spec, t)
    wave = np.sin(phase)
    if spec.second_harmonic:
        wave = wave + spec.second_harmonic * np.sin(2.0 * phase)
    return wave


def _flicker_waveform(spec: SynthSpec, t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    flicker = spec.flicker
    if flicker.kind == "none" or flicker.amp == 0.0:
        return np.zeros_like(t)
    if flicker.kind == "sinusoidal":
        return flicker.amp * np.sin(2.0 * np.pi * flicker.freq_hz * t)
    walk = np.cumsum(rng.normal(0.0, flicker.step, size=len(t)))
    peak = np.max(np.abs(walk))
    if peak == 0.0:
        return np.zeros_like(t)
    return flicker.amp * walk / peak


def synth_trace(spec: SynthSpec) -> tuple[ChannelTrace, GroundTruthPpg]:
    """Generate the channel trace and its ground-truth PPG.

    Deterministic given the spec (seeded draws happen in a fixed order:
    flicker walk, then channel noise, then spike positions).
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.duration_s * spec.fps))
    t = np.arange(n) / spec.fps
    pulse = _pulse_waveform(spec, t)
    flicker = _flicker_waveform(spec, t, rng)
    noise = rng.normal(0.0, spec.noise_std, size=(3, n)) if spec.noise_std > 0 else 0.0
    spikes = _spike_waveform(spec, n, rng)
    amps = spec.resolved_pulse_amp
    channels = []
    for base, amp in zip(spec.baseline_rgb, amps):
        channels.append(base * (1.0 + amp * pulse + flicker))
    samples = np.stack(channels) + noise + spikes
    n_ppg = int(round(spec.duration_s * DEFAULT_PPG_RATE_HZ))
    t_ppg = np.arange(n_ppg) / DEFAULT_PPG_RATE_HZ
    ppg = GroundTruthPpg(_pulse_waveform(spec, t_ppg), DEFAULT_PPG_RATE_HZ)
    trace = ChannelTrace(
        samples[0], samples[1], samples[2], spec.fps, origin_id=f"synth-{spec.seed}"
    )
    return trace, ppg


def _spike_waveform(spec: SynthSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    spikes = spec.motion_spikes
    if spikes.count < 1 or spikes.magnitude == 0.0:
        return np.zeros(n)
    width = max(1, int(round(0.25 * spec.fps)))
    bump = spikes.magnitude * np.hanning(width + 2)[1:-1]
    out = np.zeros(n)
    for start in sorted(rng.integers(0, max(1, n - width), size=spikes.count)):
        out[start : start + width] += bump[: n - start]
    return out


def _dither_frame(values: np.ndarray, width: int, height: int) -> np.ndarray:
    """Render one frame whose per-channel spatial mean approximates `values`.

    Each channel gets floor(v*255) everywhere plus 1 on the first k pixels
    (row-major), with k chosen so the mean is within 1/(2*255*npix) of v.
    """
    npix = width * height
    frame = np.empty((npix, 3), dtype=np.uint8)
    scaled = np.clip(values, 0.0, 1.0) * 255.0
    base = np.floor(scaled)
    base = np.minimum(base, 254.0)  # keep headroom for the +1 dither
    extra = np.rint((scaled - base) * npix).astype(int)
    for c in range(3):
        frame[:, c] = base[c]
        frame[: extra[c], c] += 1
    return frame.reshape(height, width, 3)


def _render_frames(trace: ChannelTrace, width: int, height: int) -> Iterator[np.ndarray]:
    stacked = trace.channels.T
    for values in stacked:
        yield _dither_frame(values, width, height)


@dataclass(frozen=True)
class RenderedDataset:
    video_path: Path
    ppg_path: Path
    manifest_path: Path
    trace: ChannelTrace
    ppg: GroundTruthPpg


def synth_render(
    spec: SynthSpec,
    width: int,
    height: int,
    out_dir: Path | str,
    stem: str = "synth",
    subject_id: str | None = None,
) -> RenderedDataset:
    """Render a spec to a raw video, PPG CSV, and single-entry manifest.

    The full-frame spatial mean of every rendered frame matches the trace
    within 1/255 per sample (spatial dithering: the mean matches, individual
    pixels do not). Same spec, same bytes.
    """
    if width < 1 or height < 1:
        raise SpecError("render size must be at least 1x1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace, ppg = synth_trace(spec)
    video_path = out_dir / f"{stem}.rppgraw"
    ppg_path = out_dir / f"{stem}_ppg.csv"
    manifest_path = out_dir / f"{stem}_manifest.json"
    ingest.write_raw_video(
        video_path, _render_frames(trace, width, height), spec.fps, n_frames=len(trace)
    )
    ingest.write_ppg_csv(ppg, ppg_path)
    entry = {
        "video_path": video_path.name,
        "ppg_path": ppg_path.name,
        "subject_id": subject_id if subject_id is not None else f"synth-{spec.seed}",
        "illumination": "controlled" if spec.flicker.kind == "none" else "natural",
        "roi": "full",
        "ppg_rate_hz": DEFAULT_PPG_RATE_HZ,
    }
    ingest.write_manifest(
        manifest_path, [entry], generator=f"{GENERATOR_ID} seed={spec.seed}"
    )
    return RenderedDataset(video_path, ppg_path, manifest_path, trace, ppg)


def ramped(spec: SynthSpec, start_bpm: float, end_bpm: float) -> SynthSpec:
    """Copy of `spec` with a linear heart-rate ramp."""
    return replace(spec, hr_bpm=(start_bpm, end_bpm))
