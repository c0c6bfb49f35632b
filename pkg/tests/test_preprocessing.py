import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chewdetect.errors import ValidationError
from chewdetect.preprocessing import (WindowFrame, frame_matrix, highpass, normalize_frames,
                                      normalize_window, segment_windows, window_count)
from chewdetect.signal_io import AudioRecording


def test_segment_count_example():
    frames = segment_windows(np.zeros(16000), 0.2, 0.05, 16000)
    # floor((16000 - 3200) / 800) + 1
    assert len(frames) == 17
    assert frames[-1].start_s == pytest.approx(0.8)
    assert all(len(f.samples) == 3200 for f in frames)


def test_too_short_signal_gives_no_windows():
    assert segment_windows(np.zeros(3199), 0.2, 0.05, 16000) == []


def test_step_larger_than_size_leaves_gaps():
    x = np.arange(20.0)
    m = frame_matrix(x, 3, 5)
    assert m[:, 0].tolist() == [0, 5, 10, 15]


@given(n=st.integers(0, 5000), win=st.integers(1, 400), step=st.integers(1, 400))
@settings(max_examples=200, deadline=None)
def test_window_count_formula(n, win, step):
    expected = 0 if n < win else (n - win) // step + 1
    assert window_count(n, win, step) == expected
    assert len(frame_matrix(np.zeros(n), win, step)) == expected


def test_bad_sizes():
    with pytest.raises(ValidationError):
        segment_windows(np.zeros(100), 0.0, 0.05)
    with pytest.raises(ValidationError):
        segment_windows(np.zeros(100), 0.2, 1e-6)


def test_normalize_unit_std(rng):
    f = WindowFrame(0.0, 0.2, rng.normal(3.0, 0.01, 3200))
    out = normalize_window(f)
    assert not out.degenerate
    assert out.samples.std() == pytest.approx(1.0, abs=1e-6)


def test_normalize_degenerate():
    out = normalize_window(WindowFrame(0.0, 0.2, np.full(3200, 0.3)))
    assert out.degenerate
    assert not np.any(out.samples)


def test_batch_normalize_matches_single(rng):
    X = rng.standard_normal((5, 320)) * np.array([1, 1e-3, 0, 5, 2])[:, None]
    out, deg = normalize_frames(X)
    assert deg.tolist() == [False, False, True, False, False]
    for row, d, o in zip(X, deg, out):
        single = normalize_window(WindowFrame(0.0, 0.02, row))
        assert single.degenerate == d
        np.testing.assert_allclose(single.samples, o)


def test_highpass_removes_dc(rng):
    fs = 16000
    t = np.arange(fs * 2) / fs
    x = 0.5 + 0.1 * np.sin(2 * np.pi * 1000 * t)
    rec = AudioRecording("s", "r", fs, np.stack([x, x]).astype(np.float32))
    y = highpass(rec, 20.0).channels
    assert abs(y[0, fs:].mean()) < 1e-3
    # passband essentially untouched
    assert y[0, fs:].std() == pytest.approx(x[fs:].std(), rel=0.01)
    with pytest.raises(ValidationError):
        highpass(rec, 9000.0)
