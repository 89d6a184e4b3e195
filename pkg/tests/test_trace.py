"""Tests for trace types and preprocessing."""

import numpy as np
import pytest

from rppgbench.errors import DegenerateChannel, InvalidRoi
from rppgbench.trace import (
    ChannelTrace,
    Rect,
    detrend,
    sliding_windows,
    spatial_mean,
    temporal_mean_normalize,
    zscore_normalize,
)


def test_channel_trace_validation():
    ChannelTrace([0.5], [0.5], [0.5], fps=20.0)
    with pytest.raises(ValueError):
        ChannelTrace([0.5, 0.5], [0.5], [0.5], fps=20.0)
    with pytest.raises(ValueError):
        ChannelTrace([0.5], [0.5], [0.5], fps=0.0)
    with pytest.raises(ValueError):
        ChannelTrace([np.nan], [0.5], [0.5], fps=20.0)


def test_spatial_mean_uniform_frame():
    frame = np.empty((6, 8, 3))
    frame[:, :, 0] = 0.5
    frame[:, :, 1] = 0.25
    frame[:, :, 2] = 0.75
    assert spatial_mean(frame, Rect(2, 1, 3, 4)) == (0.5, 0.25, 0.75)
    assert spatial_mean(frame) == (0.5, 0.25, 0.75)


def test_spatial_mean_two_pixel_roi():
    frame = np.zeros((1, 2, 3), dtype=np.uint8)
    frame[0, 1, :] = 255
    assert spatial_mean(frame, Rect(0, 0, 2, 1)) == (0.5, 0.5, 0.5)


def test_spatial_mean_checkerboard_matches_brute_force():
    # Checkerboard of (0.2, 0.4, 0.6) / (0.4, 0.6, 0.8) over an even roi.
    low = np.array([0.2, 0.4, 0.6])
    high = np.array([0.4, 0.6, 0.8])
    frame = np.empty((4, 6, 3))
    for y in range(4):
        for x in range(6):
            frame[y, x] = low if (x + y) % 2 == 0 else high
    got = spatial_mean(frame, Rect(0, 0, 6, 4))
    # Independent oracle: explicit pixel loop.
    acc = np.zeros(3)
    count = 0
    for y in range(4):
        for x in range(6):
            acc += frame[y, x]
            count += 1
    expected = acc / count
    assert np.allclose(got, expected, atol=1e-12)
    assert np.allclose(got, (0.3, 0.5, 0.7), atol=1e-12)


def test_spatial_mean_permutation_invariant():
    rng = np.random.default_rng(0)
    frame = rng.random((5, 5, 3))
    base = spatial_mean(frame)
    flat = frame.reshape(-1, 3)
    shuffled = flat[rng.permutation(len(flat))].reshape(5, 5, 3)
    assert np.allclose(spatial_mean(shuffled), base, atol=1e-12)


def test_spatial_mean_invalid_roi():
    frame = np.zeros((4, 4, 3))
    with pytest.raises(InvalidRoi):
        spatial_mean(frame, Rect(0, 0, 0, 2))
    with pytest.raises(InvalidRoi):
        spatial_mean(frame, Rect(2, 2, 4, 4))
    with pytest.raises(InvalidRoi):
        spatial_mean(frame, Rect(-1, 0, 2, 2))


def test_zscore_three_point_example():
    win = zscore_normalize(np.array([[1.0, 2.0, 3.0]] * 3), fps=20.0)
    # Sample std (n-1 denominator) of [1, 2, 3] is exactly 1.
    assert np.allclose(win.channels, [[-1.0, 0.0, 1.0]] * 3, atol=1e-12)


def test_zscore_moments():
    rng = np.random.default_rng(1)
    x = rng.random((3, 400))
    win = zscore_normalize(x, fps=20.0)
    assert np.all(np.abs(win.channels.mean(axis=1)) < 1e-9)
    assert np.all(np.abs(win.channels.std(axis=1, ddof=1) - 1.0) < 1e-6)


def test_zscore_constant_channel_raises():
    x = np.array([[5.0, 5.0, 5.0], [1.0, 2.0, 3.0], [1.0, 2.0, 3.0]])
    with pytest.raises(DegenerateChannel):
        zscore_normalize(x, fps=20.0)
    win = zscore_normalize(x, fps=20.0, substitute_zeros=True)
    assert win.degenerate_channels == (True, False, False)
    assert np.all(win.channels[0] == 0.0)


def test_zscore_affine_invariance():
    rng = np.random.default_rng(2)
    x = rng.random((3, 100))
    base = zscore_normalize(x, fps=20.0).channels
    transformed = zscore_normalize(2.5 * x + 7.0, fps=20.0).channels
    assert np.allclose(transformed, base, atol=1e-9)


def test_zscore_idempotent():
    rng = np.random.default_rng(3)
    x = rng.random((3, 256))
    once = zscore_normalize(x, fps=20.0).channels
    twice = zscore_normalize(once, fps=20.0).channels
    assert np.allclose(twice, once, atol=1e-9)


def test_temporal_mean_normalize_examples():
    out = temporal_mean_normalize(np.array([[1.0, 1.0, 1.0]] * 3))
    assert np.allclose(out, 0.0, atol=1e-12)
    out = temporal_mean_normalize(np.array([[1.0, 3.0]] * 3))
    assert np.allclose(out, [[-0.5, 0.5]] * 3, atol=1e-12)


def test_temporal_mean_normalize_scale_invariance():
    rng = np.random.default_rng(4)
    x = rng.random((3, 64)) + 0.5
    base = temporal_mean_normalize(x)
    assert np.allclose(temporal_mean_normalize(8.0 * x), base, atol=0)
    assert np.allclose(temporal_mean_normalize(3.7 * x), base, atol=1e-12)
    assert np.all(np.abs(temporal_mean_normalize(x).mean(axis=1)) < 1e-9)


def test_temporal_mean_normalize_zero_mean_raises():
    x = np.array([[0.0, 0.0], [1.0, 2.0], [1.0, 2.0]])
    with pytest.raises(DegenerateChannel):
        temporal_mean_normalize(x)


def test_sliding_window_counts():
    assert len(sliding_windows(1200, 20.0, 15.0, 1.0)) == 46
    assert len(sliding_windows(1200, 20.0, 30.0, 1.0)) == 31
    assert len(sliding_windows(1200, 20.0, 60.0, 1.0)) == 1
    assert sliding_windows(100, 20.0, 15.0, 1.0) == []


def test_sliding_window_overlap_fraction():
    views = sliding_windows(1200, 20.0, 30.0, 1.0)
    first, second = views[0], views[1]
    overlap = (first.end_index - second.start_index) / first.length
    assert abs(overlap - 29.0 / 30.0) < 1e-12  # the 96.7% overlap


def test_sliding_window_coverage():
    for trace_len, window_s, step_s in ((1200, 15.0, 1.0), (620, 4.0, 2.0)):
        views = sliding_windows(trace_len, 20.0, window_s, step_s)
        covered = np.zeros(trace_len, dtype=bool)
        for view in views:
            covered[view.start_index : view.end_index] = True
        # step <= window: the covered region is one contiguous block from 0,
        # leaving less than one step uncovered at the tail.
        assert covered[0]
        last_end = views[-1].end_index
        assert covered[:last_end].all()
        assert trace_len - last_end < max(1, round(step_s * 20.0))


def test_sliding_window_validation():
    with pytest.raises(ValueError):
        sliding_windows(100, 20.0, 0.05, 1.0)
    with pytest.raises(ValueError):
        sliding_windows(100, 20.0, 15.0, 0.0)


def test_detrend_ramp_and_constant():
    assert np.allclose(detrend(np.array([0.0, 1.0, 2.0, 3.0])), 0.0, atol=1e-12)
    assert np.allclose(detrend(np.array([4.2, 4.2, 4.2])), 0.0, atol=1e-12)


def test_detrend_preserves_full_period_sinusoid():
    n = 600
    t = np.arange(n) / 20.0
    # Cosine symmetric about the window centre: the fitted slope is exactly
    # zero, so detrending only removes the (near-zero) mean.
    x = np.cos(2 * np.pi * 1.2 * (t - t[-1] / 2))
    y = detrend(x)
    assert np.corrcoef(x, y)[0, 1] >= 0.999999
    # Generic sinusoid: output equals input minus its least-squares line
    # (polyfit oracle), and the fitted slope over 36 full periods is tiny.
    x = np.sin(2 * np.pi * 1.2 * t)
    slope, intercept = np.polyfit(np.arange(n), x, 1)
    assert abs(slope) * n < 0.06  # drift well under the unit amplitude
    expected = x - (slope * np.arange(n) + intercept)
    assert np.allclose(detrend(x), expected, atol=1e-12)
    assert np.corrcoef(x, detrend(x))[0, 1] >= 0.999


def test_detrend_removes_slope():
    rng = np.random.default_rng(5)
    x = rng.random(200) + 0.05 * np.arange(200)
    y = detrend(x)
    slope = np.polyfit(np.arange(200), y, 1)[0]
    assert abs(slope) < 1e-9
