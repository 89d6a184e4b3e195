"""Per-window heart-rate series aligned to window start times."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class HrSeries:
    """Heart-rate estimates (bpm) per sliding window.

    `skipped` lists (window_start_seconds, reason) pairs for windows that
    produced no estimate; they are excluded, never zero-filled.
    """

    window_starts_s: np.ndarray
    hr_bpm: np.ndarray
    skipped: tuple[tuple[float, str], ...] = field(default_factory=tuple)

    def __post_init__(self):
        starts = np.asarray(self.window_starts_s, dtype=float)
        hrs = np.asarray(self.hr_bpm, dtype=float)
        if starts.shape != hrs.shape or starts.ndim != 1:
            raise ValueError("starts and estimates must be 1-D and equally long")
        if len(starts) > 1 and not np.all(np.diff(starts) > 0):
            raise ValueError("window starts must be strictly increasing")
        object.__setattr__(self, "window_starts_s", starts)
        object.__setattr__(self, "hr_bpm", hrs)
        object.__setattr__(self, "skipped", tuple(self.skipped))

    def __len__(self) -> int:
        return len(self.hr_bpm)
