"""Command-line interface.

Subcommands: estimate (per-window HR from a trace or raw video), bench
(manifest-wide MAE benchmark), synth (generate synthetic datasets), report
(re-emit a stored JSON report).

Exit codes: 0 success, 1 data/runtime error, 2 usage error. Every run echoes
its effective configuration so results are reproducible from the log alone.
Output files are written atomically (temp + rename).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench, ingest, synth
from .errors import RppgError, SpecError
from .methods import METHOD_ORDER, Method, estimate_pulse
from .spectral import FrequencyBand, magnitude_spectrum
from .trace import Rect, sliding_windows

_FLOAT_FMT = "%.9g"


class UsageError(Exception):
    """Bad command-line values detected after parsing."""


def _parse_roi(text: str) -> Rect | None:
    if text == "full":
        return None
    parts = text.split(",")
    if len(parts) == 4:
        try:
            return Rect(*(int(p) for p in parts))
        except ValueError:
            pass
    raise UsageError(f"--roi must be 'full' or x,y,width,height, got {text!r}")


def _parse_methods(text: str) -> list[Method]:
    methods = []
    for name in text.split(","):
        try:
            methods.append(Method.from_name(name))
        except ValueError as exc:
            raise UsageError(str(exc))
    return methods


def _parse_windows(text: str) -> list[float]:
    try:
        windows = [float(w) for w in text.split(",")]
    except ValueError:
        raise UsageError(f"--windows must be comma-separated seconds, got {text!r}")
    if not windows or any(w <= 0 for w in windows):
        raise UsageError("--windows values must be positive")
    return windows


def _parse_hr(text: str) -> float | tuple[float, float]:
    try:
        if ":" in text:
            start, end = text.split(":")
            return (float(start), float(end))
        return float(text)
    except ValueError:
        raise UsageError(f"--hr must be BPM or START:END, got {text!r}")


def _parse_flicker(text: str) -> synth.Flicker:
    if text == "none":
        return synth.Flicker.none()
    parts = text.split(":")
    try:
        if len(parts) == 3 and parts[0] in ("sin", "sinusoidal"):
            return synth.Flicker.sinusoidal(freq_hz=float(parts[1]), amp=float(parts[2]))
        if len(parts) == 3 and parts[0] in ("walk", "random_walk"):
            return synth.Flicker.random_walk(step=float(parts[1]), amp=float(parts[2]))
    except ValueError:
        pass
    raise UsageError(
        f"--flicker must be 'none', 'sin:FREQ_HZ:AMP', or 'walk:STEP:AMP', got {text!r}"
    )


def _band(args) -> FrequencyBand:
    try:
        return FrequencyBand(args.band_low, args.band_high)
    except ValueError as exc:
        raise UsageError(str(exc))


def _add_band_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--band-low", type=float, default=0.7, help="band low edge in Hz")
    parser.add_argument("--band-high", type=float, default=4.0, help="band high edge in Hz")


def _echo_config(name: str, pairs: dict) -> None:
    rendered = " ".join(f"{k}={v}" for k, v in pairs.items())
    print(f"config: {name} {rendered}")


def cmd_estimate(args) -> int:
    band = _band(args)
    roi = _parse_roi(args.roi)
    method = Method.from_name(args.method)
    _echo_config(
        "estimate",
        {
            "method": method.cli_name,
            "input": args.input,
            "roi": args.roi,
            "fps_override": args.fps_override,
            "window_s": args.window,
            "step_s": args.step,
            "band_hz": f"[{band.low_hz:g},{band.high_hz:g}]",
            "out": args.out,
        },
    )
    trace = ingest.load_trace(args.input, roi=roi, fps_override=args.fps_override)
    series = bench.estimate_hr_series(trace, method, args.window, args.step, band)
    lines = ["t,hr_bpm"]
    for t, hr in zip(series.window_starts_s, series.hr_bpm):
        lines.append(f"{_FLOAT_FMT % t},{_FLOAT_FMT % hr}")
    out = Path(args.out) if args.out else Path(f"{Path(args.input).stem}_hr.csv")
    ingest.atomic_write_text(out, "\n".join(lines) + "\n")
    if args.dump_spectrum:
        _dump_spectra(trace, method, args, band)
    mean_hr = float(np.mean(series.hr_bpm)) if len(series) else float("nan")
    print(f"windows: {len(series)} (skipped: {len(series.skipped)})")
    print(f"mean hr: {mean_hr:.2f} bpm")
    print(f"wrote {out}")
    return 0


def _dump_spectra(trace, method: Method, args, band: FrequencyBand) -> None:
    """Tidy per-window pulse spectra (plot data), bins up to 2x band high."""
    views = sliding_windows(len(trace), trace.fps, args.window, args.step)
    channels = trace.channels
    lines = ["window_start_s,freq_hz,magnitude"]
    for view in views:
        start_s = view.start_seconds(trace.fps)
        try:
            pulse = estimate_pulse(method, view.slice(channels), trace.fps, band)
        except RppgError:
            continue
        spectrum = magnitude_spectrum(pulse.samples, trace.fps)
        freqs = spectrum.frequencies
        keep = freqs <= 2.0 * band.high_hz
        for f, m in zip(freqs[keep], spectrum.magnitudes[keep]):
            lines.append(f"{_FLOAT_FMT % start_s},{_FLOAT_FMT % f},{_FLOAT_FMT % m}")
    ingest.atomic_write_text(args.dump_spectrum, "\n".join(lines) + "\n")
    print(f"wrote {args.dump_spectrum}")


def cmd_bench(args) -> int:
    band = _band(args)
    methods = _parse_methods(args.methods)
    windows = _parse_windows(args.windows)
    _echo_config(
        "bench",
        {
            "manifest": args.manifest,
            "methods": ",".join(m.cli_name for m in methods),
            "windows_s": ",".join(f"{w:g}" for w in windows),
            "step_s": args.step,
            "band_hz": f"[{band.low_hz:g},{band.high_hz:g}]",
            "format": args.format,
            "out": args.out,
        },
    )
    manifest = ingest.read_manifest(args.manifest)
    report = bench.run_benchmark(
        manifest,
        methods=methods,
        window_lengths=windows,
        step_seconds=args.step,
        band=band,
    )
    for failure in report.failures:
        print(f"warning: {failure}", file=sys.stderr)
    print(bench.emit_report(report, "markdown"), end="")
    if args.out:
        ingest.atomic_write_text(args.out, bench.emit_report(report, args.format))
        print(f"wrote {args.out}")
    return 0


def cmd_synth(args) -> int:
    flicker = _parse_flicker(args.flicker)
    spec = synth.SynthSpec(
        duration_s=args.duration,
        hr_bpm=_parse_hr(args.hr),
        fps=args.fps,
        flicker=flicker,
        noise_std=args.noise,
        seed=args.seed,
    )
    _echo_config(
        "synth",
        {
            "hr_bpm": args.hr,
            "duration_s": args.duration,
            "fps": args.fps,
            "flicker": args.flicker,
            "noise_std": args.noise,
            "seed": args.seed,
            "render": args.render or "no",
            "out": args.out,
        },
    )
    spec.validate()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = args.stem
    trace, ppg = synth.synth_trace(spec)
    written: list[Path] = []
    trace_path = out_dir / f"{stem}_trace.csv"
    ingest.write_trace_csv(trace, trace_path)
    written.append(trace_path)
    if args.render:
        try:
            w, h = (int(v) for v in args.render.lower().split("x"))
        except ValueError:
            raise UsageError(f"--render must be WIDTHxHEIGHT, got {args.render!r}")
        rendered = synth.synth_render(spec, w, h, out_dir, stem=stem)
        written += [rendered.video_path, rendered.ppg_path, rendered.manifest_path]
    else:
        ppg_path = out_dir / f"{stem}_ppg.csv"
        ingest.write_ppg_csv(ppg, ppg_path)
        manifest_path = out_dir / f"{stem}_manifest.json"
        entry = {
            "video_path": trace_path.name,
            "ppg_path": ppg_path.name,
            "subject_id": f"synth-{spec.seed}",
            "illumination": "controlled" if flicker.kind == "none" else "natural",
            "roi": "full",
            "ppg_rate_hz": ingest.DEFAULT_PPG_RATE_HZ,
        }
        ingest.write_manifest(
            manifest_path, [entry], generator=f"{synth.GENERATOR_ID} seed={spec.seed}"
        )
        written += [ppg_path, manifest_path]
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_report(args) -> int:
    _echo_config("report", {"input": args.input, "format": args.format, "out": args.out})
    report = bench.parse_report(Path(args.input).read_text(encoding="utf-8"))
    text = bench.emit_report(report, args.format)
    if args.out:
        ingest.atomic_write_text(args.out, text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rppgbench",
        description="Hand-crafted rPPG heart-rate estimators and benchmark harness",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    est = sub.add_parser("estimate", help="per-window HR from a trace CSV or raw video")
    est.add_argument("--method", required=True, choices=[m.cli_name for m in METHOD_ORDER])
    est.add_argument("--input", required=True, help="trace CSV or RPPGRAW1 video")
    est.add_argument("--roi", default="full", help="'full' or x,y,width,height")
    est.add_argument("--fps-override", type=float, default=None)
    est.add_argument("--window", type=float, default=30.0, help="window length in seconds")
    est.add_argument("--step", type=float, default=1.0, help="slide step in seconds")
    est.add_argument("--out", default=None, help="output HR CSV path")
    est.add_argument("--dump-spectrum", default=None, help="write per-window spectra CSV")
    _add_band_flags(est)
    est.set_defaults(func=cmd_estimate)

    ben = sub.add_parser("bench", help="run the MAE benchmark over a manifest")
    ben.add_argument("--manifest", required=True)
    ben.add_argument("--methods", default="green,ica,chrom,pos")
    ben.add_argument("--windows", default="15,30,60", help="window lengths in seconds")
    ben.add_argument("--step", type=float, default=1.0)
    ben.add_argument("--format", default="markdown", choices=["csv", "markdown", "json"])
    ben.add_argument("--out", default=None, help="report output path")
    _add_band_flags(ben)
    ben.set_defaults(func=cmd_bench)

    syn = sub.add_parser("synth", help="generate a synthetic dataset")
    syn.add_argument("--hr", default="72", help="heart rate in bpm, or START:END ramp")
    syn.add_argument("--duration", type=float, default=60.0, help="seconds")
    syn.add_argument("--fps", type=float, default=20.0)
    syn.add_argument("--flicker", default="none", help="none | sin:FREQ:AMP | walk:STEP:AMP")
    syn.add_argument("--noise", type=float, default=0.0, help="gaussian noise std")
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--render", default=None, help="also render a WxH raw video")
    syn.add_argument("--out", required=True, help="output directory")
    syn.add_argument("--stem", default="synth", help="output file name stem")
    syn.set_defaults(func=cmd_synth)

    rep = sub.add_parser("report", help="re-emit a stored JSON report")
    rep.add_argument("--input", required=True, help="JSON report path")
    rep.add_argument("--format", default="markdown", choices=["csv", "markdown", "json"])
    rep.add_argument("--out", default=None)
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, SpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RppgError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
