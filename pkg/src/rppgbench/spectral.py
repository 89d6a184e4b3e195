"""Frequency-domain machinery: magnitude spectra, band-limited peak picking
with sub-bin refinement, band SNR, and zero-phase FIR band-pass filtering.

Raw spectral resolution at 20 fps is coarse (a 15 s window gives 1/15 Hz,
i.e. 4 bpm per bin), so spectra are Hann-windowed and zero-padded and peaks
are refined by parabolic interpolation to resolve well below one bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .errors import BandTooNarrow, SignalTooShort

# Taps of the band-pass FIR at 20 fps; scaled proportionally for other rates.
FIR_TAPS_AT_20FPS = 127

# Zero-pad FFTs to the next power of two at least this factor times the
# window length, for sub-bin peak resolution.
FFT_PAD_FACTOR = 4

# Half-width of the signal region around the peak (and its 2nd harmonic)
# when computing band SNR.
DEFAULT_GUARD_HZ = 0.1


@dataclass(frozen=True)
class FrequencyBand:
    """A [low_hz, high_hz] frequency interval, 0 < low < high."""

    low_hz: float
    high_hz: float

    def __post_init__(self):
        if not 0 < self.low_hz < self.high_hz:
            raise ValueError(f"invalid band [{self.low_hz}, {self.high_hz}]")

    def check_against(self, fps: float) -> None:
        if not self.high_hz < fps / 2:
            raise ValueError(f"band high {self.high_hz} Hz >= Nyquist of {fps} fps")


# Physiologically plausible heart-rate band: 42-240 bpm.
DEFAULT_BAND = FrequencyBand(0.7, 4.0)


@dataclass(frozen=True)
class Spectrum:
    """One-sided magnitude spectrum with its frequency resolution."""

    magnitudes: np.ndarray
    bin_hz: float
    fps: float

    def __post_init__(self):
        object.__setattr__(self, "magnitudes", np.asarray(self.magnitudes, dtype=float))
        if self.magnitudes.ndim != 1 or not self.bin_hz > 0:
            raise ValueError("magnitudes must be 1-D with bin_hz > 0")

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(len(self.magnitudes)) * self.bin_hz


def default_fft_length(n: int) -> int:
    """Smallest power of two >= FFT_PAD_FACTOR * n."""
    return 1 << max(0, (FFT_PAD_FACTOR * n - 1)).bit_length()


def magnitude_spectrum(
    signal: np.ndarray, fps: float, zero_pad_to: int | None = None
) -> Spectrum:
    """One-sided magnitude spectrum of the mean-removed, Hann-windowed signal.

    Args:
        signal: 1-D sample sequence, length >= 2.
        fps: sampling rate in Hz.
        zero_pad_to: FFT length (>= signal length); defaults to the next
            power of two >= 4x the signal length.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("signal must be 1-D with length >= 2")
    n = len(x)
    if zero_pad_to is None:
        zero_pad_to = default_fft_length(n)
    if zero_pad_to < n:
        raise ValueError("zero_pad_to must be >= signal length")
    windowed = (x - x.mean()) * np.hanning(n)
    mags = np.abs(np.fft.rfft(windowed, n=zero_pad_to))
    return Spectrum(mags, fps / zero_pad_to, fps)


def band_peak_hz(spectrum: Spectrum, band: FrequencyBand) -> float:
    """Frequency of the maximum-magnitude bin inside the band, refined.

    The peak bin is refined by parabolic interpolation over its two
    neighbours (on magnitude, not log magnitude) and the result is clamped
    back into the band. Ties break toward the lowest frequency.

    Raises:
        BandTooNarrow: fewer than 3 spectrum bins fall inside the band.
    """
    freqs = spectrum.frequencies
    inside = np.flatnonzero((freqs >= band.low_hz) & (freqs <= band.high_hz))
    if len(inside) < 3:
        raise BandTooNarrow(
            f"band [{band.low_hz}, {band.high_hz}] Hz covers {len(inside)} bins"
        )
    mags = spectrum.magnitudes
    peak = inside[np.argmax(mags[inside])]
    delta = 0.0
    if 0 < peak < len(mags) - 1:
        alpha, beta, gamma = mags[peak - 1], mags[peak], mags[peak + 1]
        denom = alpha - 2.0 * beta + gamma
        if abs(denom) > 0.0:
            delta = 0.5 * (alpha - gamma) / denom
            delta = float(np.clip(delta, -0.5, 0.5))
    hz = (peak + delta) * spectrum.bin_hz
    return float(min(max(hz, band.low_hz), band.high_hz))


def band_snr(
    spectrum: Spectrum,
    band: FrequencyBand,
    peak_hz: float,
    guard_hz: float = DEFAULT_GUARD_HZ,
) -> float:
    """Band SNR in dB around a peak and its second harmonic.

    Power density (power per bin) within +-guard_hz of peak_hz and of
    2*peak_hz, restricted to the band, is compared against the power
    density of the remaining in-band bins:

        snr = 10 * log10(signal_density / residual_density)

    Density normalisation keeps white noise near 0 dB regardless of the
    guard width. An empty residual region returns +inf.
    """
    if not band.low_hz <= peak_hz <= band.high_hz:
        raise ValueError(f"peak {peak_hz} Hz outside band [{band.low_hz}, {band.high_hz}]")
    if not guard_hz > 0:
        raise ValueError("guard_hz must be > 0")
    freqs = spectrum.frequencies
    in_band = (freqs >= band.low_hz) & (freqs <= band.high_hz)
    near_peak = np.abs(freqs - peak_hz) <= guard_hz
    near_harmonic = np.abs(freqs - 2.0 * peak_hz) <= guard_hz
    sig = in_band & (near_peak | near_harmonic)
    noise = in_band & ~sig
    power = spectrum.magnitudes**2
    n_sig = int(sig.sum())
    n_noise = int(noise.sum())
    if n_sig == 0:
        raise ValueError("guard region contains no bins")
    if n_noise == 0:
        return math.inf
    sig_density = power[sig].sum() / n_sig
    noise_density = power[noise].sum() / n_noise
    if noise_density == 0.0:
        return math.inf
    if sig_density == 0.0:
        return -math.inf
    return float(10.0 * np.log10(sig_density / noise_density))


def fir_taps(fps: float, band: FrequencyBand) -> np.ndarray:
    """Linear-phase windowed-sinc band-pass taps (Hamming window).

    The tap count scales with the sampling rate (127 taps at 20 fps) and is
    kept odd so the group delay is an integer number of samples.
    """
    band.check_against(fps)
    ntaps = int(round(FIR_TAPS_AT_20FPS * fps / 20.0))
    if ntaps % 2 == 0:
        ntaps += 1
    ntaps = max(ntaps, 9)
    return scipy.signal.firwin(
        ntaps, [band.low_hz, band.high_hz], window="hamming", pass_zero=False, fs=fps
    )


def bandpass_fir(
    signal: np.ndarray, fps: float, band: FrequencyBand = DEFAULT_BAND
) -> np.ndarray:
    """Zero-phase band-pass filter; output has the same length as the input.

    The linear-phase FIR from `fir_taps` is applied forward and backward;
    edges are handled by symmetric reflection padding.

    Raises:
        SignalTooShort: signal is not longer than the filter.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise ValueError("signal must be 1-D")
    taps = fir_taps(fps, band)
    if len(x) <= len(taps):
        raise SignalTooShort(f"need more than {len(taps)} samples, got {len(x)}")
    pad = len(taps)
    padded = np.pad(x, pad, mode="reflect")
    forward = np.convolve(padded, taps, mode="same")
    backward = np.convolve(forward[::-1], taps, mode="same")[::-1]
    return backward[pad : pad + len(x)]
