"""Exception types shared across the package."""

from __future__ import annotations


class RppgError(Exception):
    """Base class for all domain errors raised by this package."""


class InvalidRoi(RppgError):
    """ROI is empty, degenerate, or lies outside the frame bounds."""


class DegenerateChannel(RppgError):
    """A channel carries no usable variation (constant or near-constant)."""


class BandTooNarrow(RppgError):
    """Frequency band covers fewer spectrum bins than peak picking needs."""


class SignalTooShort(RppgError):
    """Signal has too few samples for the requested operation."""


class FormatError(RppgError):
    """File content does not match the expected on-disk format."""


class TruncatedVideo(FormatError):
    """Raw video payload is shorter than the header promises."""

    def __init__(self, expected_bytes: int, actual_bytes: int):
        self.expected_bytes = expected_bytes
        self.actual_bytes = actual_bytes
        super().__init__(
            f"truncated payload: expected {expected_bytes} bytes, found {actual_bytes}"
        )


class ManifestError(FormatError):
    """Dataset manifest is missing fields or internally inconsistent."""

    def __init__(self, message: str, field: str | None = None, index: int | None = None):
        self.field = field
        self.index = index
        where = "" if index is None else f" (entry {index})"
        what = "" if field is None else f" [{field}]"
        super().__init__(f"{message}{what}{where}")


class EmptyEvaluation(RppgError):
    """No windows produced comparable estimates."""


class SpecError(RppgError):
    """Synthetic-data specification violates its invariants."""
