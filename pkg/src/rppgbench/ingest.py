"""Dataset ingestion: manifests, the raw RGB video container, trace and PPG
CSV files, and ground-truth heart-rate extraction from contact PPG.

File formats
------------
Raw video ("RPPGRAW1"): the 8-byte magic, a little-endian 4-byte length,
a UTF-8 JSON header {"width", "height", "fps", "frames"}, then tightly
packed interleaved RGB24 frames (row-major, top-left origin). Codec-free
and bit-exact; external tools convert real recordings into it.

Trace CSV: header "t,r,g,b", one row per frame, decimal floats. The frame
rate is inferred from the median t spacing.

PPG CSV: header "ppg", one sample per row; the sampling rate comes from the
manifest entry (default 256 Hz).

Manifest: JSON {"entries": [...]} where each entry carries video_path,
ppg_path, subject_id, illumination ("controlled" | "natural"), an optional
roi ("full" or [x, y, width, height]) and optional ppg_rate_hz.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import FormatError, ManifestError, TruncatedVideo
from .series import HrSeries
from .spectral import DEFAULT_BAND, FrequencyBand, band_peak_hz, magnitude_spectrum
from .trace import DEGENERATE_STD, ChannelTrace, Rect, sliding_windows, spatial_mean

RAW_VIDEO_MAGIC = b"RPPGRAW1"
DEFAULT_PPG_RATE_HZ = 256.0

_FLOAT_FMT = "%.9g"


def atomic_write_bytes(path: Path | str, data: bytes) -> None:
    """Write via a temp file and rename, so readers never see partial files."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path | str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


@dataclass(frozen=True)
class VideoMeta:
    width: int
    height: int
    fps: float
    frames: int


@dataclass(frozen=True)
class GroundTruthPpg:
    """Contact-PPG waveform used as ground truth."""

    samples: np.ndarray
    sample_rate_hz: float = DEFAULT_PPG_RATE_HZ

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if self.samples.ndim != 1:
            raise ValueError("ppg samples must be 1-D")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be > 0")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("ppg contains non-finite samples")

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class ManifestEntry:
    video_path: Path
    ppg_path: Path
    subject_id: str
    illumination: str
    roi: Rect | None = None
    ppg_rate_hz: float = DEFAULT_PPG_RATE_HZ

    @property
    def origin_id(self) -> str:
        return self.video_path.stem


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    generator: str | None = None

    def subjects(self) -> set[str]:
        return {e.subject_id for e in self.entries}


@dataclass(frozen=True)
class SubjectSplit:
    """Disjoint train/validation/test subject-id sets."""

    train_ids: frozenset[str] = field(default_factory=frozenset)
    validation_ids: frozenset[str] = field(default_factory=frozenset)
    test_ids: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        for name in ("train_ids", "validation_ids", "test_ids"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if (
            self.train_ids & self.validation_ids
            or self.train_ids & self.test_ids
            or self.validation_ids & self.test_ids
        ):
            raise ValueError("split sets must be pairwise disjoint")

    def assert_covers(self, manifest: DatasetManifest) -> None:
        missing = manifest.subjects() - (self.train_ids | self.validation_ids | self.test_ids)
        if missing:
            raise ValueError(f"split does not cover subjects: {sorted(missing)}")


_ILLUMINATIONS = ("controlled", "natural")


def _parse_roi(value, index: int) -> Rect | None:
    if value is None or value == "full":
        return None
    if isinstance(value, (list, tuple)) and len(value) == 4:
        try:
            return Rect(*(int(v) for v in value))
        except (TypeError, ValueError):
            pass
    raise ManifestError("roi must be \"full\" or [x, y, width, height]", "roi", index)


def read_manifest(path: Path | str) -> DatasetManifest:
    """Load and validate a dataset manifest; relative paths are resolved
    against the manifest's directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("entries"), list):
        raise ManifestError("top level must be an object with an \"entries\" list")
    base = path.parent
    entries = []
    for i, item in enumerate(raw["entries"]):
        if not isinstance(item, dict):
            raise ManifestError("entry must be an object", index=i)
        for fieldname in ("video_path", "ppg_path", "subject_id", "illumination"):
            if fieldname not in item:
                raise ManifestError("missing field", fieldname, i)
        if not str(item["subject_id"]).strip():
            raise ManifestError("subject_id must be nonempty", "subject_id", i)
        if item["illumination"] not in _ILLUMINATIONS:
            raise ManifestError(
                f"illumination must be one of {_ILLUMINATIONS}", "illumination", i
            )
        rate = float(item.get("ppg_rate_hz", DEFAULT_PPG_RATE_HZ))
        if not rate > 0:
            raise ManifestError("ppg_rate_hz must be > 0", "ppg_rate_hz", i)
        entries.append(
            ManifestEntry(
                video_path=_resolve(base, item["video_path"]),
                ppg_path=_resolve(base, item["ppg_path"]),
                subject_id=str(item["subject_id"]),
                illumination=item["illumination"],
                roi=_parse_roi(item.get("roi"), i),
                ppg_rate_hz=rate,
            )
        )
    for fieldname in ("video_path", "ppg_path"):
        seen: dict[Path, int] = {}
        for i, entry in enumerate(entries):
            p = getattr(entry, fieldname)
            if p in seen:
                raise ManifestError(f"duplicate path {p}", fieldname, i)
            seen[p] = i
    return DatasetManifest(tuple(entries), generator=raw.get("generator"))


def _resolve(base: Path, p: str) -> Path:
    candidate = Path(p)
    return candidate if candidate.is_absolute() else base / candidate


def write_manifest(
    path: Path | str, entries: Iterable[dict], generator: str | None = None
) -> None:
    """Write a manifest; entry dicts are stored as given (paths usually
    relative to the manifest's directory)."""
    doc: dict = {"entries": list(entries)}
    if generator is not None:
        doc["generator"] = generator
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_raw_video(
    path: Path | str,
    frames: Iterable[np.ndarray],
    fps: float,
    n_frames: int | None = None,
) -> None:
    """Write frames into the raw container.

    Args:
        frames: (T, H, W, 3) uint8 array, or any iterable of (H, W, 3)
            uint8 frames (pass n_frames when the iterable has no len()).
    """
    if n_frames is None:
        try:
            n_frames = len(frames)  # type: ignore[arg-type]
        except TypeError:
            raise ValueError("n_frames is required for sized-less frame iterables")
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    written = 0
    try:
        with os.fdopen(fd, "wb") as out:
            header_written = False
            for frame in frames:
                frame = np.ascontiguousarray(frame, dtype=np.uint8)
                if frame.ndim != 3 or frame.shape[2] != 3:
                    raise ValueError("frames must have shape (height, width, 3)")
                if not header_written:
                    h, w = frame.shape[:2]
                    header = json.dumps(
                        {"width": w, "height": h, "fps": fps, "frames": n_frames},
                        sort_keys=True,
                    ).encode("utf-8")
                    out.write(RAW_VIDEO_MAGIC)
                    out.write(struct.pack("<I", len(header)))
                    out.write(header)
                    header_written = True
                elif frame.shape[:2] != (h, w):
                    raise ValueError("all frames must share one size")
                out.write(frame.tobytes())
                written += 1
            if written != n_frames:
                raise ValueError(f"expected {n_frames} frames, got {written}")
            if written == 0:
                raise ValueError("cannot write a video with no frames")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_raw_video(path: Path | str) -> tuple[VideoMeta, Iterator[np.ndarray]]:
    """Open a raw container; returns metadata and a lazy frame iterator.

    The payload size is checked eagerly against the header, so truncation is
    reported before any frame is consumed.

    Raises:
        FormatError: bad magic or malformed header, or trailing bytes.
        TruncatedVideo: payload shorter than width*height*3*frames.
    """
    path = Path(path)
    with open(path, "rb") as handle:
        magic = handle.read(len(RAW_VIDEO_MAGIC))
        if magic != RAW_VIDEO_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        length_raw = handle.read(4)
        if len(length_raw) != 4:
            raise FormatError(f"{path}: missing header length")
        (header_len,) = struct.unpack("<I", length_raw)
        header_raw = handle.read(header_len)
        if len(header_raw) != header_len:
            raise FormatError(f"{path}: truncated header")
        try:
            header = json.loads(header_raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: header is not valid JSON: {exc}") from exc
        offset = handle.tell()
    try:
        meta = VideoMeta(
            width=int(header["width"]),
            height=int(header["height"]),
            fps=float(header["fps"]),
            frames=int(header["frames"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad header fields: {exc}") from exc
    if meta.width < 1 or meta.height < 1 or meta.frames < 1 or not meta.fps > 0:
        raise FormatError(f"{path}: non-positive header fields")
    expected = meta.width * meta.height * 3 * meta.frames
    actual = path.stat().st_size - offset
    if actual < expected:
        raise TruncatedVideo(expected, actual)
    if actual > expected:
        raise FormatError(f"{path}: {actual - expected} trailing bytes after payload")

    def frames() -> Iterator[np.ndarray]:
        frame_bytes = meta.width * meta.height * 3
        with open(path, "rb") as payload:
            payload.seek(offset)
            for _ in range(meta.frames):
                buf = payload.read(frame_bytes)
                yield np.frombuffer(buf, dtype=np.uint8).reshape(
                    meta.height, meta.width, 3
                )

    return meta, frames()


def video_to_trace(
    frames: Iterable[np.ndarray],
    fps: float,
    roi: Rect | None = None,
    origin_id: str = "",
) -> ChannelTrace:
    """Spatially average each frame over the ROI into a channel trace."""
    reds, greens, blues = [], [], []
    for frame in frames:
        r, g, b = spatial_mean(frame, roi)
        reds.append(r)
        greens.append(g)
        blues.append(b)
    return ChannelTrace(reds, greens, blues, fps, origin_id)


def write_trace_csv(trace: ChannelTrace, path: Path | str) -> None:
    lines = ["t,r,g,b"]
    for i in range(len(trace)):
        t = i / trace.fps
        lines.append(
            ",".join(
                _FLOAT_FMT % v
                for v in (t, trace.samples_r[i], trace.samples_g[i], trace.samples_b[i])
            )
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_trace_csv(path: Path | str, origin_id: str | None = None) -> ChannelTrace:
    """Read a trace CSV; fps is inferred from the median t spacing.

    Raises:
        FormatError: wrong header, unparsable rows, non-monotone t, or
            t jitter beyond 1% of the median spacing.
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "t,r,g,b":
        raise FormatError(f"{path}: expected header \"t,r,g,b\"")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise FormatError(f"{path}:{lineno}: expected 4 columns")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if len(rows) < 2:
        raise FormatError(f"{path}: need at least 2 rows to infer fps")
    data = np.asarray(rows)
    dt = np.diff(data[:, 0])
    if np.any(dt <= 0):
        raise FormatError(f"{path}: t column must be strictly increasing")
    median_dt = float(np.median(dt))
    if np.any(np.abs(dt - median_dt) > 0.01 * median_dt):
        raise FormatError(f"{path}: t spacing jitter exceeds 1%")
    return ChannelTrace(
        data[:, 1],
        data[:, 2],
        data[:, 3],
        fps=1.0 / median_dt,
        origin_id=origin_id if origin_id is not None else path.stem,
    )


def write_ppg_csv(ppg: GroundTruthPpg, path: Path | str) -> None:
    lines = ["ppg"] + [_FLOAT_FMT % v for v in ppg.samples]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_ppg_csv(path: Path | str, sample_rate_hz: float = DEFAULT_PPG_RATE_HZ) -> GroundTruthPpg:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "ppg":
        raise FormatError(f"{path}: expected header \"ppg\"")
    try:
        samples = [float(line) for line in lines[1:] if line.strip()]
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return GroundTruthPpg(np.asarray(samples), sample_rate_hz)


def is_raw_video(path: Path | str) -> bool:
    """True when the file starts with the raw container magic."""
    try:
        with open(path, "rb") as handle:
            return handle.read(len(RAW_VIDEO_MAGIC)) == RAW_VIDEO_MAGIC
    except OSError:
        return False


def load_trace(
    path: Path | str,
    roi: Rect | None = None,
    fps_override: float | None = None,
    origin_id: str | None = None,
) -> ChannelTrace:
    """Load a trace from either a raw video or a trace CSV file."""
    path = Path(path)
    if is_raw_video(path):
        meta, frames = read_raw_video(path)
        fps = fps_override if fps_override is not None else meta.fps
        return video_to_trace(
            frames, fps, roi, origin_id if origin_id is not None else path.stem
        )
    trace = read_trace_csv(path, origin_id)
    if fps_override is not None:
        trace = ChannelTrace(
            trace.samples_r, trace.samples_g, trace.samples_b, fps_override, trace.origin_id
        )
    return trace


def ground_truth_hr(
    ppg: GroundTruthPpg,
    window_seconds: float,
    step_seconds: float,
    band: FrequencyBand = DEFAULT_BAND,
) -> HrSeries:
    """Windowed spectral heart-rate readout of the contact PPG.

    Uses exactly the same windowing + spectrum + band peak code path as the
    estimators, at the PPG's native sampling rate. Degenerate (constant)
    windows are skipped with a reason.
    """
    band.check_against(ppg.sample_rate_hz)
    views = sliding_windows(len(ppg.samples), ppg.sample_rate_hz, window_seconds, step_seconds)
    starts, hrs = [], []
    skipped = []
    for view in views:
        start_s = view.start_seconds(ppg.sample_rate_hz)
        segment = view.slice(ppg.samples)
        if segment.std(ddof=1) < DEGENERATE_STD:
            skipped.append((start_s, "degenerate channel"))
            continue
        spec = magnitude_spectrum(segment, ppg.sample_rate_hz)
        hrs.append(60.0 * band_peak_hz(spec, band))
        starts.append(start_s)
    return HrSeries(np.asarray(starts), np.asarray(hrs), tuple(skipped))
