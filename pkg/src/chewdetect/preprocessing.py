"""High-pass pre-filter, window segmentation and per-window standardization."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal as sps

from .errors import ValidationError
from .signal_io import AudioRecording

DEFAULT_WINDOW_S = 0.2
DEFAULT_STEP_S = 0.05
DEFAULT_CUTOFF_HZ = 20.0
DEGENERATE_STD = 1e-8


@dataclass(frozen=True)
class WindowFrame:
    start_s: float
    size_s: float
    samples: np.ndarray
    channel_index: int = 0
    degenerate: bool = False


def highpass(recording: AudioRecording, cutoff_hz: float = DEFAULT_CUTOFF_HZ,
             order: int = 2) -> AudioRecording:
    """Butterworth high-pass applied per channel with zero initial state."""
    nyq = recording.sample_rate_hz / 2.0
    if not 0.0 < cutoff_hz < nyq:
        raise ValidationError(f"cutoff must lie in (0, {nyq}) Hz, got {cutoff_hz}")
    sos = sps.butter(order, cutoff_hz, btype="highpass", fs=recording.sample_rate_hz, output="sos")
    out = sps.sosfilt(sos, recording.channels, axis=-1).astype(recording.channels.dtype, copy=False)
    return replace(recording, channels=out)


def samples_per(duration_s: float, sample_rate: int) -> int:
    return int(round(duration_s * sample_rate))


def window_count(n_samples: int, win: int, step: int) -> int:
    if n_samples < win:
        return 0
    return (n_samples - win) // step + 1


def frame_matrix(x: np.ndarray, win: int, step: int) -> np.ndarray:
    """Read-only strided (n_windows, win) view; row i starts at sample i*step."""
    x = np.asarray(x)
    n = window_count(len(x), win, step)
    if n == 0:
        return np.empty((0, win), dtype=x.dtype)
    return sliding_window_view(x, win)[::step][:n]


def _check_sizes(size_s: float, step_s: float, sample_rate: int) -> tuple[int, int]:
    if size_s <= 0 or step_s <= 0:
        raise ValidationError("window size and step must be positive")
    win, step = samples_per(size_s, sample_rate), samples_per(step_s, sample_rate)
    if win < 1 or step < 1:
        raise ValidationError("window size/step shorter than one sample")
    return win, step


def window_starts(n_samples: int, size_s: float, step_s: float, sample_rate: int) -> np.ndarray:
    win, step = _check_sizes(size_s, step_s, sample_rate)
    return np.arange(window_count(n_samples, win, step)) * step / sample_rate


def segment_windows(signal, size_s: float = DEFAULT_WINDOW_S, step_s: float = DEFAULT_STEP_S,
                    sample_rate: int = 16000, channel_index: int = 0) -> list[WindowFrame]:
    win, step = _check_sizes(size_s, step_s, sample_rate)
    frames = frame_matrix(np.asarray(signal), win, step)
    return [WindowFrame(start_s=i * step / sample_rate, size_s=size_s, samples=row,
                        channel_index=channel_index)
            for i, row in enumerate(frames)]


def normalize_window(frame: WindowFrame) -> WindowFrame:
    """Divide by the window's standard deviation; the mean is left untouched.

    Frames with std below 1e-8 come back as zeros with ``degenerate`` set.
    """
    x = np.asarray(frame.samples, dtype=np.float64)
    sd = x.std()
    if sd < DEGENERATE_STD:
        return replace(frame, samples=np.zeros_like(x), degenerate=True)
    return replace(frame, samples=x / sd, degenerate=False)


def normalize_frames(frames: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batch form of :func:`normalize_window` over rows of ``frames``."""
    x = np.asarray(frames, dtype=np.float64)
    sd = x.std(axis=-1)
    degenerate = sd < DEGENERATE_STD
    safe = np.where(degenerate, 1.0, sd)
    out = x / safe[..., None]
    out[degenerate] = 0.0
    return out, degenerate
