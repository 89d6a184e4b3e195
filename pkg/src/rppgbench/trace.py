"""Core time-series types and preprocessing for RGB channel traces.

A *trace* is the per-frame spatial mean of the three color channels over a
region of interest, sampled at the video frame rate. Everything here is a
pure function of its inputs; values are safe to share between workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal

from .errors import DegenerateChannel, InvalidRoi

# Below this sample standard deviation a channel is treated as constant.
DEGENERATE_STD = 1e-12


@dataclass(frozen=True)
class Rect:
    """Pixel rectangle: origin (x, y) top-left, extent (width, height)."""

    x: int
    y: int
    width: int
    height: int


@dataclass(frozen=True)
class ChannelTrace:
    """Per-frame spatial-mean RGB values over time.

    Samples are dimensionless mean pixel intensities in [0, 1]; all three
    channels have the same length and share one sampling rate.
    """

    samples_r: np.ndarray
    samples_g: np.ndarray
    samples_b: np.ndarray
    fps: float
    origin_id: str = ""

    def __post_init__(self):
        for name in ("samples_r", "samples_g", "samples_b"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(self.samples_r)
        if n < 1 or len(self.samples_g) != n or len(self.samples_b) != n:
            raise ValueError("channel sequences must have identical length >= 1")
        if not self.fps > 0:
            raise ValueError("fps must be > 0")
        for name in ("samples_r", "samples_g", "samples_b"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite samples")

    def __len__(self) -> int:
        return len(self.samples_r)

    @property
    def channels(self) -> np.ndarray:
        """Channels stacked as a (3, n) array in R, G, B order."""
        return np.stack([self.samples_r, self.samples_g, self.samples_b])

    @property
    def duration_seconds(self) -> float:
        return len(self) / self.fps


@dataclass(frozen=True)
class WindowView:
    """A contiguous slice of a trace for sliding-window processing."""

    start_index: int
    length: int
    step_seconds: float

    def __post_init__(self):
        if self.start_index < 0 or self.length < 2 or not self.step_seconds > 0:
            raise ValueError("invalid window view")

    @property
    def end_index(self) -> int:
        return self.start_index + self.length

    def start_seconds(self, fps: float) -> float:
        return self.start_index / fps

    def slice(self, channels: np.ndarray) -> np.ndarray:
        """Resolve against a (..., n) sample array; bounds-checked."""
        if self.end_index > channels.shape[-1]:
            raise ValueError("window extends past end of trace")
        return channels[..., self.start_index : self.end_index]


@dataclass(frozen=True)
class NormalizedWindow:
    """Three z-scored channel slices sharing one sampling rate.

    Channels flagged in `degenerate_channels` were constant in the source
    window and hold zeros instead of z-scores.
    """

    channels: np.ndarray
    fps: float
    degenerate_channels: tuple[bool, bool, bool] = (False, False, False)

    def __post_init__(self):
        object.__setattr__(self, "channels", np.asarray(self.channels, dtype=float))
        if self.channels.shape[0] != 3 or self.channels.ndim != 2:
            raise ValueError("expected a (3, n) channel array")

    @property
    def length(self) -> int:
        return self.channels.shape[1]


def spatial_mean(frame: np.ndarray, roi: Rect | None = None) -> tuple[float, float, float]:
    """Per-channel arithmetic mean of the pixels inside `roi`, scaled to [0, 1].

    Args:
        frame: (height, width, 3) raster; uint8 values are divided by 255,
            float values are assumed to be in [0, 1] already.
        roi: rectangle inside the frame, or None for the full frame.

    Raises:
        InvalidRoi: empty or out-of-bounds rectangle.
    """
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise ValueError("frame must have shape (height, width, 3)")
    h, w = frame.shape[:2]
    if roi is None:
        roi = Rect(0, 0, w, h)
    if roi.width < 1 or roi.height < 1:
        raise InvalidRoi(f"degenerate roi {roi}")
    if roi.x < 0 or roi.y < 0 or roi.x + roi.width > w or roi.y + roi.height > h:
        raise InvalidRoi(f"roi {roi} outside {w}x{h} frame")
    patch = frame[roi.y : roi.y + roi.height, roi.x : roi.x + roi.width, :]
    means = patch.reshape(-1, 3).mean(axis=0, dtype=float)
    if np.issubdtype(frame.dtype, np.integer):
        means = means / 255.0
    return float(means[0]), float(means[1]), float(means[2])


def zscore_normalize(
    channels: np.ndarray, fps: float, substitute_zeros: bool = False
) -> NormalizedWindow:
    """Z-score each channel to zero mean and unit sample standard deviation.

    The standard deviation uses the n-1 denominator. A constant channel
    raises DegenerateChannel unless `substitute_zeros` is set, in which case
    it becomes zeros and is flagged on the returned window.
    """
    x = np.asarray(channels, dtype=float)
    if x.ndim != 2 or x.shape[0] != 3:
        raise ValueError("expected a (3, n) channel array")
    if x.shape[1] < 2:
        raise ValueError("each channel needs at least 2 samples")
    mean = x.mean(axis=1, keepdims=True)
    std = x.std(axis=1, ddof=1, keepdims=True)
    degenerate = std[:, 0] < DEGENERATE_STD
    if degenerate.any() and not substitute_zeros:
        bad = "RGB"[int(np.flatnonzero(degenerate)[0])]
        raise DegenerateChannel(f"channel {bad} has near-zero variance")
    out = np.zeros_like(x)
    ok = ~degenerate
    out[ok] = (x[ok] - mean[ok]) / std[ok]
    return NormalizedWindow(out, fps, tuple(bool(d) for d in degenerate))


def temporal_mean_normalize(channels: np.ndarray) -> np.ndarray:
    """Divide each channel by its temporal mean and subtract 1.

    Output is invariant under positive per-channel scaling of the input.

    Raises:
        DegenerateChannel: a channel mean is not positive (no intensity).
    """
    x = np.asarray(channels, dtype=float)
    if x.ndim != 2 or x.shape[0] != 3:
        raise ValueError("expected a (3, n) channel array")
    mean = x.mean(axis=1, keepdims=True)
    if np.any(mean <= DEGENERATE_STD):
        bad = "RGB"[int(np.flatnonzero(mean[:, 0] <= DEGENERATE_STD)[0])]
        raise DegenerateChannel(f"channel {bad} has near-zero mean")
    return x / mean - 1.0


def sliding_windows(
    trace_len: int, fps: float, window_seconds: float, step_seconds: float
) -> list[WindowView]:
    """Window views at start times 0, step, 2*step, ... while a window fits.

    Window length is round(window_seconds * fps) samples and the step is
    round(step_seconds * fps) samples, floored at 1. A trace shorter than
    one window yields an empty list.
    """
    length = int(round(window_seconds * fps))
    if length < 2:
        raise ValueError("window must span at least 2 samples")
    if not step_seconds > 0:
        raise ValueError("step_seconds must be > 0")
    step = max(1, int(round(step_seconds * fps)))
    views = []
    start = 0
    while start + length <= trace_len:
        views.append(WindowView(start, length, step_seconds))
        start += step
    return views


def detrend(signal: np.ndarray) -> np.ndarray:
    """Remove the least-squares linear trend from a signal.

    The output has zero mean and zero linear regression slope.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1 or len(x) < 3:
        raise ValueError("signal must be 1-D with length >= 3")
    return scipy.signal.detrend(x, type="linear")
