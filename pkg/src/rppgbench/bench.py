"""Evaluation harness: sliding-window heart-rate estimation against contact
PPG ground truth, MAE/RMSE aggregation, and report serialization.

"Window length" means the analysis-window duration slid over the full
recording (1 s step by default), so a 60 s video yields 46/31/1 windows for
15/30/60 s windows. Windows where either side failed to produce an estimate
are excluded pairwise and counted, never zero-filled.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateChannel, EmptyEvaluation, RppgError
from .ingest import (
    DatasetManifest,
    GroundTruthPpg,
    SubjectSplit,
    ground_truth_hr,
    load_trace,
    read_ppg_csv,
)
from .methods import METHOD_ORDER, Method, estimate_pulse, hr_from_pulse
from .series import HrSeries
from .spectral import DEFAULT_BAND, FFT_PAD_FACTOR, FIR_TAPS_AT_20FPS, FrequencyBand
from .trace import ChannelTrace, sliding_windows

DEFAULT_WINDOW_LENGTHS = (15.0, 30.0, 60.0)
DEFAULT_STEP_SECONDS = 1.0

WORKERS_ENV_VAR = "RPPG_THREADS"


@dataclass(frozen=True)
class CellStats:
    """Aggregate error statistics for one (method, window length) cell."""

    mae_bpm: float
    rmse_bpm: float
    n_windows: int
    n_skipped: int


@dataclass(frozen=True)
class BenchReport:
    """Per-method, per-window-length aggregates plus per-video breakdown."""

    config: dict
    cells: dict[tuple[str, float], CellStats]
    per_video: dict[tuple[str, float, str], CellStats]
    mean_mae_bpm: dict[str, float]
    failures: tuple[str, ...] = field(default_factory=tuple)


def mae(errors: Iterable[float]) -> float:
    """Mean absolute error; raises EmptyEvaluation on an empty sequence."""
    arr = np.asarray(list(errors) if not isinstance(errors, np.ndarray) else errors, dtype=float)
    if arr.size == 0:
        raise EmptyEvaluation("no error values")
    return float(np.mean(np.abs(arr)))


def rmse(errors: Iterable[float]) -> float:
    """Root-mean-square error; raises EmptyEvaluation on an empty sequence."""
    arr = np.asarray(list(errors) if not isinstance(errors, np.ndarray) else errors, dtype=float)
    if arr.size == 0:
        raise EmptyEvaluation("no error values")
    return float(np.sqrt(np.mean(arr**2)))


def estimate_hr_series(
    trace: ChannelTrace,
    method: Method,
    window_seconds: float,
    step_seconds: float = DEFAULT_STEP_SECONDS,
    band: FrequencyBand = DEFAULT_BAND,
) -> HrSeries:
    """Per-window heart-rate estimates for one method over a full trace.

    Windows that raise DegenerateChannel are skipped and recorded.
    """
    views = sliding_windows(len(trace), trace.fps, window_seconds, step_seconds)
    channels = trace.channels
    starts, hrs = [], []
    skipped = []
    for view in views:
        start_s = view.start_seconds(trace.fps)
        try:
            pulse = estimate_pulse(method, view.slice(channels), trace.fps, band)
            hr = hr_from_pulse(pulse, band)
        except DegenerateChannel as exc:
            skipped.append((start_s, str(exc)))
            continue
        starts.append(start_s)
        hrs.append(hr)
    return HrSeries(np.asarray(starts), np.asarray(hrs), tuple(skipped))


def _ordinal_maps(series: HrSeries, step_seconds: float) -> tuple[dict[int, float], set[int]]:
    estimates = {
        int(round(s / step_seconds)): h
        for s, h in zip(series.window_starts_s, series.hr_bpm)
    }
    skipped = {int(round(s / step_seconds)) for s, _ in series.skipped}
    return estimates, skipped


def paired_errors(
    est: HrSeries, gt: HrSeries, step_seconds: float = DEFAULT_STEP_SECONDS
) -> tuple[np.ndarray, int]:
    """Absolute errors on windows both sides estimated, aligned by start
    second; the second value counts pairwise-excluded (skipped) windows."""
    est_map, est_skip = _ordinal_maps(est, step_seconds)
    gt_map, gt_skip = _ordinal_maps(gt, step_seconds)
    candidates = sorted((est_map.keys() | est_skip) & (gt_map.keys() | gt_skip))
    matched = [o for o in candidates if o in est_map and o in gt_map]
    errors = np.asarray([abs(est_map[o] - gt_map[o]) for o in matched], dtype=float)
    return errors, len(candidates) - len(matched)


def evaluate_video(
    trace: ChannelTrace,
    ppg: GroundTruthPpg,
    method: Method,
    window_seconds: float,
    step_seconds: float = DEFAULT_STEP_SECONDS,
    band: FrequencyBand = DEFAULT_BAND,
) -> tuple[HrSeries, HrSeries, np.ndarray]:
    """Estimate vs ground truth on windows aligned by start second.

    Returns (estimates, ground truth, per-window absolute errors). Errors
    cover only windows where both sides produced a value.

    Raises:
        EmptyEvaluation: no window produced a comparable pair.
    """
    if abs(trace.duration_seconds - ppg.duration_seconds) > 1.0:
        raise ValueError(
            f"trace ({trace.duration_seconds:.1f} s) and ppg "
            f"({ppg.duration_seconds:.1f} s) cover different time spans"
        )
    est = estimate_hr_series(trace, method, window_seconds, step_seconds, band)
    gt = ground_truth_hr(ppg, window_seconds, step_seconds, band)
    errors, n_excluded = paired_errors(est, gt, step_seconds)
    if len(errors) == 0 and n_excluded == 0:
        raise EmptyEvaluation("no overlapping windows")
    if len(errors) == 0:
        raise EmptyEvaluation("all overlapping windows were skipped")
    return est, gt, errors


def _worker_cap(n_entries: int, max_workers: int | None) -> int:
    cap = max_workers
    if cap is None:
        env = os.environ.get(WORKERS_ENV_VAR, "").strip()
        if env:
            try:
                cap = int(env)
            except ValueError:
                raise ValueError(f"{WORKERS_ENV_VAR} must be an integer, got {env!r}")
    if cap is None:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_entries))


def run_benchmark(
    manifest: DatasetManifest,
    split: SubjectSplit | None = None,
    methods: Sequence[Method] = METHOD_ORDER,
    window_lengths: Sequence[float] = DEFAULT_WINDOW_LENGTHS,
    step_seconds: float = DEFAULT_STEP_SECONDS,
    band: FrequencyBand = DEFAULT_BAND,
    max_workers: int | None = None,
) -> BenchReport:
    """Evaluate every method and window length over the manifest.

    With a split, only test-subject entries run. Entries are processed in
    parallel (capped by the RPPG_THREADS environment variable or
    `max_workers`); aggregation is a deterministic reduction independent of
    completion order. Per-entry failures are recorded, not fatal.

    Raises:
        EmptyEvaluation: every entry/cell failed to produce errors.
    """
    if not manifest.entries:
        raise EmptyEvaluation("manifest has no entries")
    entries = list(manifest.entries)
    if split is not None:
        entries = [e for e in entries if e.subject_id in split.test_ids]
        if not entries:
            raise EmptyEvaluation("no manifest entries in the test split")
    window_lengths = [float(w) for w in window_lengths]
    methods = list(methods)

    def job(entry):
        # Returns (origin_id, {(method, window) -> (errors, n_skipped)}, [failures])
        cells: dict[tuple[str, float], tuple[np.ndarray, int]] = {}
        failures: list[str] = []
        try:
            trace = load_trace(entry.video_path, roi=entry.roi, origin_id=entry.origin_id)
            ppg = read_ppg_csv(entry.ppg_path, entry.ppg_rate_hz)
        except (RppgError, OSError, ValueError) as exc:
            failures.append(f"{entry.origin_id}: {exc}")
            return entry.origin_id, cells, failures
        for method in methods:
            for window_s in window_lengths:
                try:
                    est, gt, errors = evaluate_video(
                        trace, ppg, method, window_s, step_seconds, band
                    )
                    _, n_skipped = paired_errors(est, gt, step_seconds)
                    cells[(method.value, window_s)] = (errors, n_skipped)
                except (RppgError, ValueError) as exc:
                    failures.append(
                        f"{entry.origin_id}: {method.value} @ {window_s:g} s: {exc}"
                    )
        return entry.origin_id, cells, failures

    workers = _worker_cap(len(entries), max_workers)
    if workers == 1:
        results = [job(e) for e in entries]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, entries))

    per_video: dict[tuple[str, float, str], CellStats] = {}
    pooled: dict[tuple[str, float], list[tuple[str, np.ndarray, int]]] = {}
    failures: list[str] = []
    for origin_id, cells, entry_failures in results:
        failures.extend(entry_failures)
        for cell_key, (errors, n_skipped) in cells.items():
            method_name, window_s = cell_key
            per_video[(method_name, window_s, origin_id)] = CellStats(
                mae(errors), rmse(errors), len(errors), n_skipped
            )
            pooled.setdefault(cell_key, []).append((origin_id, errors, n_skipped))

    cells: dict[tuple[str, float], CellStats] = {}
    for cell_key, parts in pooled.items():
        # Concatenate in sorted origin order so aggregation is independent
        # of manifest entry order.
        parts = sorted(parts, key=lambda p: p[0])
        errors = np.concatenate([p[1] for p in parts])
        n_skipped = sum(p[2] for p in parts)
        cells[cell_key] = CellStats(mae(errors), rmse(errors), len(errors), n_skipped)
    if not cells:
        raise EmptyEvaluation("; ".join(failures) or "all entries failed")

    mean_mae: dict[str, float] = {}
    for method in methods:
        maes = [
            cells[(method.value, w)].mae_bpm
            for w in window_lengths
            if (method.value, w) in cells
        ]
        if maes:
            mean_mae[method.value] = float(np.mean(maes))

    config = {
        "band_low_hz": band.low_hz,
        "band_high_hz": band.high_hz,
        "step_seconds": float(step_seconds),
        "window_lengths_s": window_lengths,
        "methods": [m.value for m in methods],
        "fir_taps_at_20fps": FIR_TAPS_AT_20FPS,
        "fft_pad_factor": FFT_PAD_FACTOR,
        "n_entries": len(entries),
    }
    return BenchReport(config, cells, per_video, mean_mae, tuple(sorted(failures)))


def _method_sort_key(name: str) -> tuple[int, str]:
    order = [m.value for m in METHOD_ORDER]
    return (order.index(name) if name in order else len(order), name)


def _sorted_cells(report: BenchReport) -> list[tuple[tuple[str, float], CellStats]]:
    return sorted(
        report.cells.items(), key=lambda kv: (_method_sort_key(kv[0][0]), -kv[0][1])
    )


def emit_report(report: BenchReport, fmt: str = "markdown") -> str:
    """Serialize a report as csv, markdown, or json (all deterministic)."""
    if fmt == "csv":
        return _emit_csv(report)
    if fmt == "markdown":
        return _emit_markdown(report)
    if fmt == "json":
        return _emit_json(report)
    raise ValueError(f"unknown report format {fmt!r}; use csv, markdown, or json")


def _emit_csv(report: BenchReport) -> str:
    lines = ["method,window_s,mae_bpm,rmse_bpm,n_windows,n_skipped"]
    for (method_name, window_s), stats in _sorted_cells(report):
        lines.append(
            f"{method_name},{window_s:g},{stats.mae_bpm!r},{stats.rmse_bpm!r},"
            f"{stats.n_windows},{stats.n_skipped}"
        )
    return "\n".join(lines) + "\n"


def _emit_markdown(report: BenchReport) -> str:
    windows = sorted({w for _, w in report.cells}, reverse=True)
    methods = sorted({m for m, _ in report.cells}, key=_method_sort_key)
    header = ["Method"] + [f"{w:g} s" for w in windows] + ["Mean"]
    rows: list[list[str]] = []
    # Best (lowest) value per column is bold; ties are all marked.
    col_values: list[list[float]] = []
    for w in windows:
        col_values.append(
            [report.cells[(m, w)].mae_bpm for m in methods if (m, w) in report.cells]
        )
    mean_values = [report.mean_mae_bpm[m] for m in methods if m in report.mean_mae_bpm]
    best = [min(v) if v else None for v in col_values]
    best_mean = min(mean_values) if mean_values else None

    def fmt_cell(value: float | None, best_value: float | None) -> str:
        if value is None:
            return "-"
        text = f"{value:.2f}"
        if best_value is not None and value == best_value:
            return f"**{text}**"
        return text

    for m in methods:
        row = [m]
        for j, w in enumerate(windows):
            stats = report.cells.get((m, w))
            row.append(fmt_cell(stats.mae_bpm if stats else None, best[j]))
        row.append(fmt_cell(report.mean_mae_bpm.get(m), best_mean))
        rows.append(row)
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join(["---"] * len(header)) + "|",
    ]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


def _emit_json(report: BenchReport) -> str:
    doc = {
        "config": report.config,
        "cells": [
            {
                "method": method_name,
                "window_s": window_s,
                "mae_bpm": stats.mae_bpm,
                "rmse_bpm": stats.rmse_bpm,
                "n_windows": stats.n_windows,
                "n_skipped": stats.n_skipped,
            }
            for (method_name, window_s), stats in _sorted_cells(report)
        ],
        "per_video": [
            {
                "method": method_name,
                "window_s": window_s,
                "origin_id": origin_id,
                "mae_bpm": stats.mae_bpm,
                "rmse_bpm": stats.rmse_bpm,
                "n_windows": stats.n_windows,
                "n_skipped": stats.n_skipped,
            }
            for (method_name, window_s, origin_id), stats in sorted(
                report.per_video.items(),
                key=lambda kv: (_method_sort_key(kv[0][0]), -kv[0][1], kv[0][2]),
            )
        ],
        "mean_mae_bpm": dict(sorted(report.mean_mae_bpm.items(), key=lambda kv: _method_sort_key(kv[0]))),
        "failures": list(report.failures),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def parse_report(text: str) -> BenchReport:
    """Parse a JSON report back into a BenchReport (emit round-trips)."""
    doc = json.loads(text)
    cells = {
        (c["method"], float(c["window_s"])): CellStats(
            c["mae_bpm"], c["rmse_bpm"], c["n_windows"], c["n_skipped"]
        )
        for c in doc["cells"]
    }
    per_video = {
        (c["method"], float(c["window_s"]), c["origin_id"]): CellStats(
            c["mae_bpm"], c["rmse_bpm"], c["n_windows"], c["n_skipped"]
        )
        for c in doc["per_video"]
    }
    return BenchReport(
        config=doc.get("config", {}),
        cells=cells,
        per_video=per_video,
        mean_mae_bpm=dict(doc.get("mean_mae_bpm", {})),
        failures=tuple(doc.get("failures", ())),
    )
