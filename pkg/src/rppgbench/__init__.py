"""rppgbench: hand-crafted remote-photoplethysmography heart-rate estimators
(GREEN, ICA, CHROM, POS) with a windowed MAE benchmark harness and a
synthetic-data generator for verification."""

from .bench import (
    BenchReport,
    CellStats,
    emit_report,
    estimate_hr_series,
    evaluate_video,
    mae,
    parse_report,
    rmse,
    run_benchmark,
)
from .errors import (
    BandTooNarrow,
    DegenerateChannel,
    EmptyEvaluation,
    FormatError,
    InvalidRoi,
    ManifestError,
    RppgError,
    SignalTooShort,
    SpecError,
    TruncatedVideo,
)
from .ingest import (
    DatasetManifest,
    GroundTruthPpg,
    ManifestEntry,
    SubjectSplit,
    VideoMeta,
    ground_truth_hr,
    load_trace,
    read_manifest,
    read_ppg_csv,
    read_raw_video,
    read_trace_csv,
    video_to_trace,
    write_manifest,
    write_ppg_csv,
    write_raw_video,
    write_trace_csv,
)
from .methods import (
    IcaResult,
    Method,
    PulseSignal,
    chrom_projection,
    chrom_pulse,
    estimate_pulse,
    fastica_3ch,
    green_pulse,
    hr_from_pulse,
    ica_poh_pulse,
    pos_pulse,
    select_pulse_component,
)
from .series import HrSeries
from .spectral import (
    DEFAULT_BAND,
    FrequencyBand,
    Spectrum,
    band_peak_hz,
    band_snr,
    bandpass_fir,
    magnitude_spectrum,
)
from .synth import Flicker, MotionSpikes, SynthSpec, synth_render, synth_trace
from .trace import (
    ChannelTrace,
    NormalizedWindow,
    Rect,
    WindowView,
    detrend,
    sliding_windows,
    spatial_mean,
    temporal_mean_normalize,
    zscore_normalize,
)

__version__ = "0.1.0"
