"""The four hand-crafted pulse estimators and the shared HR readout.

Each method maps one RGB window to a 1-D pulse signal:

* GREEN   - band-pass filtered green channel.
* ICA_POH - blind source separation of the z-scored channels; the component
            with the strongest in-band SNR is taken as the pulse.
* CHROM   - chrominance projection X = 3Rn - 2Gn, Y = 1.5Rn + Gn - 1.5Bn
            combined as X - (std X / std Y) * Y, then band-pass filtered.
* POS     - projection onto the plane orthogonal to uniform intensity:
            S1 = Gn - Bn, S2 = Gn + Bn - 2Rn, pulse = S1 + (std S1 / std S2) * S2.
            No band-pass filter is applied.

CHROM and POS work on temporally mean-normalized channels and are therefore
exactly invariant under global positive scaling of the raw input; their
projection rows annihilate uniform intensity changes, which is what makes
them robust to illumination flicker.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChannel, SignalTooShort
from .spectral import (
    DEFAULT_BAND,
    FrequencyBand,
    band_peak_hz,
    band_snr,
    bandpass_fir,
    magnitude_spectrum,
)
from .trace import (
    DEGENERATE_STD,
    NormalizedWindow,
    detrend,
    temporal_mean_normalize,
    zscore_normalize,
)

ICA_MAX_ITER = 200
ICA_TOL = 1e-6


class Method(enum.Enum):
    """Estimator identifiers, in canonical reporting order."""

    GREEN = "GREEN"
    ICA_POH = "ICA_POH"
    CHROM = "CHROM"
    POS = "POS"

    @property
    def cli_name(self) -> str:
        return _CLI_NAMES[self]

    @classmethod
    def from_name(cls, name: str) -> "Method":
        key = name.strip().lower()
        for method, cli in _CLI_NAMES.items():
            if key in (cli, method.value.lower()):
                return method
        valid = ", ".join(sorted(c for c in _CLI_NAMES.values()))
        raise ValueError(f"unknown method {name!r}; valid methods: {valid}")


_CLI_NAMES = {
    Method.GREEN: "green",
    Method.ICA_POH: "ica",
    Method.CHROM: "chrom",
    Method.POS: "pos",
}

METHOD_ORDER = (Method.GREEN, Method.ICA_POH, Method.CHROM, Method.POS)


@dataclass(frozen=True)
class PulseSignal:
    """A pulse waveform extracted from one window."""

    samples: np.ndarray
    fps: float
    method_id: Method

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("pulse contains non-finite samples")


@dataclass(frozen=True)
class IcaResult:
    """Outcome of the fixed-point ICA on one window.

    `components` equals `unmixing` applied to the whitened input; the rows
    of `unmixing` are orthonormal.
    """

    components: np.ndarray
    unmixing: np.ndarray
    converged: bool
    iterations: int


def whiten_3ch(channels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Whiten a (3, n) array by eigendecomposition of the sample covariance.

    Returns (whitened, transform) with whitened = transform @ centered input.

    Raises:
        DegenerateChannel: covariance has an eigenvalue <= 1e-10.
    """
    x = np.asarray(channels, dtype=float)
    x = x - x.mean(axis=1, keepdims=True)
    n = x.shape[1]
    cov = (x @ x.T) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    if np.any(eigvals <= 1e-10):
        raise DegenerateChannel("channel covariance is singular")
    transform = (eigvecs / np.sqrt(eigvals)).T
    return transform @ x, transform


def _symmetric_decorrelate(w: np.ndarray) -> np.ndarray:
    """Replace W by (W W^T)^(-1/2) W, making its rows orthonormal."""
    vals, vecs = np.linalg.eigh(w @ w.T)
    if np.any(vals <= 1e-12):
        raise DegenerateChannel("unmixing estimate collapsed to singular")
    return (vecs / np.sqrt(vals)) @ vecs.T @ w


def fastica_3ch(
    window: NormalizedWindow, max_iter: int = ICA_MAX_ITER, tol: float = ICA_TOL
) -> IcaResult:
    """Fixed-point ICA with tanh contrast and symmetric decorrelation.

    Deterministic by construction: whitening comes from an eigendecomposition
    of the sample covariance and the rotation starts at the identity. When
    the maximum rotation change stays above `tol` after `max_iter` sweeps the
    best iterate is returned with converged=False; that is not an error.
    """
    z, _ = whiten_3ch(window.channels)
    n = z.shape[1]
    w = np.eye(3)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        u = w @ z
        g = np.tanh(u)
        g_prime_mean = (1.0 - g**2).mean(axis=1)
        w_new = (g @ z.T) / n - g_prime_mean[:, None] * w
        w_new = _symmetric_decorrelate(w_new)
        change = np.max(np.abs(1.0 - np.abs(np.sum(w_new * w, axis=1))))
        w = w_new
        if change < tol:
            converged = True
            break
    return IcaResult(w @ z, w, converged, iterations)


def select_pulse_component(
    components: np.ndarray, fps: float, band: FrequencyBand = DEFAULT_BAND
) -> int:
    """Index of the component with maximal in-band SNR (lowest index wins ties)."""
    best_index = 0
    best_snr = -np.inf
    for i, comp in enumerate(components):
        spec = magnitude_spectrum(comp, fps)
        peak = band_peak_hz(spec, band)
        snr = band_snr(spec, band, peak)
        if snr > best_snr:
            best_snr = snr
            best_index = i
    return best_index


def _population_skewness(x: np.ndarray) -> float:
    centered = x - x.mean()
    m2 = np.mean(centered**2)
    if m2 == 0.0:
        return 0.0
    return float(np.mean(centered**3) / m2**1.5)


def _sign_normalize(samples: np.ndarray) -> np.ndarray:
    """Resolve ICA sign indeterminacy: positive skewness, falling back to a
    positive largest-magnitude sample when the skewness is negligible."""
    skew = _population_skewness(samples)
    if abs(skew) >= 1e-6:
        return samples if skew > 0 else -samples
    peak_sample = samples[np.argmax(np.abs(samples))]
    return samples if peak_sample >= 0 else -samples


def green_pulse(window: NormalizedWindow, band: FrequencyBand = DEFAULT_BAND) -> PulseSignal:
    """Band-pass filtered green channel; reads nothing from red or blue."""
    if window.degenerate_channels[1]:
        raise DegenerateChannel("green channel has near-zero variance")
    filtered = bandpass_fir(window.channels[1], window.fps, band)
    return PulseSignal(filtered, window.fps, Method.GREEN)


def ica_poh_pulse(
    window: NormalizedWindow,
    band: FrequencyBand = DEFAULT_BAND,
    max_iter: int = ICA_MAX_ITER,
    tol: float = ICA_TOL,
) -> PulseSignal:
    """Pulse from the independent component with the strongest in-band SNR.

    The selected component is band-pass filtered and sign-normalized so the
    returned waveform is stable across runs.
    """
    result = fastica_3ch(window, max_iter=max_iter, tol=tol)
    index = select_pulse_component(result.components, window.fps, band)
    filtered = bandpass_fir(result.components[index], window.fps, band)
    return PulseSignal(_sign_normalize(filtered), window.fps, Method.ICA_POH)


def chrom_projection(channels: np.ndarray, fps: float) -> np.ndarray:
    """Unfiltered CHROM pulse: X - (std X / std Y) * Y on mean-normalized input.

    Raises:
        DegenerateChannel: a channel mean is non-positive or std(Y) is zero.
    """
    normed = temporal_mean_normalize(channels)
    x = 3.0 * normed[0] - 2.0 * normed[1]
    y = 1.5 * normed[0] + normed[1] - 1.5 * normed[2]
    std_y = y.std(ddof=1)
    if std_y < DEGENERATE_STD:
        raise DegenerateChannel("chrominance component Y has near-zero variance")
    alpha = x.std(ddof=1) / std_y
    return x - alpha * y


def chrom_pulse(
    channels: np.ndarray, fps: float, band: FrequencyBand = DEFAULT_BAND
) -> PulseSignal:
    """CHROM estimator: chrominance projection, then zero-phase band-pass."""
    raw = chrom_projection(channels, fps)
    return PulseSignal(bandpass_fir(raw, fps, band), fps, Method.CHROM)


def pos_pulse(channels: np.ndarray, fps: float) -> PulseSignal:
    """POS estimator: plane-orthogonal-to-skin-tone projection, no band-pass.

    Identical channels are annihilated exactly (both projection rows are
    orthogonal to (1, 1, 1)), giving a zero pulse. Constant channels carry
    no pulse information and raise DegenerateChannel instead.
    """
    x = np.asarray(channels, dtype=float)
    normed = temporal_mean_normalize(x)
    if np.all(x.std(axis=1, ddof=1) < DEGENERATE_STD):
        raise DegenerateChannel("all channels are constant")
    s1 = normed[1] - normed[2]
    s2 = normed[1] + normed[2] - 2.0 * normed[0]
    std_s1 = s1.std(ddof=1)
    std_s2 = s2.std(ddof=1)
    if std_s2 < DEGENERATE_STD:
        if std_s1 < DEGENERATE_STD:
            # Projection annihilated the input (e.g. pure intensity flicker).
            return PulseSignal(np.zeros_like(s1), fps, Method.POS)
        raise DegenerateChannel("projection component S2 has near-zero variance")
    pulse = s1 + (std_s1 / std_s2) * s2
    return PulseSignal(pulse - pulse.mean(), fps, Method.POS)


def hr_from_pulse(pulse: PulseSignal, band: FrequencyBand = DEFAULT_BAND) -> float:
    """Heart rate in bpm: 60 times the band-limited spectral peak frequency."""
    if len(pulse.samples) < 2 * pulse.fps:
        raise SignalTooShort("need at least 2 seconds of pulse signal")
    spec = magnitude_spectrum(pulse.samples, pulse.fps)
    return 60.0 * band_peak_hz(spec, band)


def normalized_window_from_raw(channels: np.ndarray, fps: float) -> NormalizedWindow:
    """Detrend then z-score raw channel slices (the GREEN/ICA preprocessing)."""
    x = np.asarray(channels, dtype=float)
    detrended = np.stack([detrend(c) for c in x])
    return zscore_normalize(detrended, fps)


def estimate_pulse(
    method: Method,
    channels: np.ndarray,
    fps: float,
    band: FrequencyBand = DEFAULT_BAND,
) -> PulseSignal:
    """Run one estimator on raw (3, n) window channels.

    GREEN and ICA_POH consume detrended, z-scored channels; CHROM and POS
    perform their own temporal mean normalization on the raw values.
    """
    if method in (Method.GREEN, Method.ICA_POH):
        window = normalized_window_from_raw(channels, fps)
        if method is Method.GREEN:
            return green_pulse(window, band)
        return ica_poh_pulse(window, band)
    if method is Method.CHROM:
        return chrom_pulse(channels, fps, band)
    if method is Method.POS:
        return pos_pulse(channels, fps)
    raise ValueError(f"unknown method {method!r}")
