"""Per-window feature extraction.

Every feature function accepts a single frame (1-D) or a batch of frames
(2-D, one frame per row) and reduces along the last axis. Frames are
expected to be standardized already (see :mod:`chewdetect.preprocessing`).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from ._kernels import time_domain_stats
from .errors import ValidationError
from .preprocessing import WindowFrame, frame_matrix, normalize_frames, samples_per

COND_CLAMP = 1e12
_TINY = 1e-20

DEFAULT_BANDS = ((0.0, 250.0), (250.0, 1000.0), (1000.0, 4000.0), (4000.0, 8000.0))


def _band_name(lo: float, hi: float) -> str:
    return f"band_{int(lo)}_{int(hi)}"


ALL_FEATURES = (
    "log_energy", "zcr", "skewness", "kurtosis", "fractal_dim", "log_cond",
    "spectral_centroid", "spectral_rolloff", "spectral_flatness",
) + tuple(_band_name(lo, hi) for lo, hi in DEFAULT_BANDS)


@dataclass(frozen=True)
class FeatureConfig:
    enabled: tuple[str, ...] | None = None    # None = every feature in the catalog
    fd_method: str = "katz"          # or "higuchi"
    higuchi_kmax: int = 10
    ac_order: int = 10
    rolloff: float = 0.85
    bands: tuple[tuple[float, float], ...] = DEFAULT_BANDS

    def __post_init__(self):
        object.__setattr__(self, "bands", tuple(tuple(map(float, b)) for b in self.bands))
        enabled = self.catalog() if self.enabled is None else tuple(self.enabled)
        object.__setattr__(self, "enabled", enabled)
        known = set(self.catalog())
        unknown = [f for f in self.enabled if f not in known]
        if unknown:
            raise ValidationError(f"unknown features: {unknown}")
        if not self.enabled:
            raise ValidationError("at least one feature must be enabled")
        if self.fd_method not in ("katz", "higuchi"):
            raise ValidationError(f"fd_method must be 'katz' or 'higuchi', got {self.fd_method!r}")
        if self.ac_order < 2:
            raise ValidationError("autocorrelation order must be >= 2")
        if not 0.0 < self.rolloff < 1.0:
            raise ValidationError("rolloff fraction must lie in (0, 1)")

    def catalog(self) -> tuple[str, ...]:
        return ALL_FEATURES[:9] + tuple(_band_name(lo, hi) for lo, hi in self.bands)

    @property
    def names(self) -> tuple[str, ...]:
        # catalog order, regardless of the order features were enabled in
        return tuple(f for f in self.catalog() if f in self.enabled)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    names: tuple[str, ...]
    window_start_s: float


@dataclass
class FeatureMatrix:
    """Rows of feature vectors for one subject (or a pooled training set)."""
    values: np.ndarray
    names: tuple[str, ...]
    window_start_s: np.ndarray
    labels: np.ndarray | None = None
    subject_id: str = ""
    degenerate: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        self.window_start_s = np.asarray(self.window_start_s, dtype=np.float64)
        if self.labels is not None:
            self.labels = np.asarray(self.labels).astype(np.int8)
            if len(self.labels) != len(self.values):
                raise ValidationError("labels length differs from number of rows")
        if len(self.window_start_s) != len(self.values):
            raise ValidationError("window_start_s length differs from number of rows")

    def __len__(self) -> int:
        return len(self.values)

    def take(self, idx) -> "FeatureMatrix":
        return FeatureMatrix(
            values=self.values[idx], names=self.names, window_start_s=self.window_start_s[idx],
            labels=None if self.labels is None else self.labels[idx], subject_id=self.subject_id,
            degenerate=None if self.degenerate is None else self.degenerate[idx])


# ---------------------------------------------------------------------------
# time-domain features
# ---------------------------------------------------------------------------

def _scalar(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


def log_energy(x):
    x = np.asarray(x, dtype=np.float64)
    return _scalar(np.log10(np.mean(x * x, axis=-1) + 1e-12))


def zero_crossing_rate(x):
    """Fraction of adjacent sample pairs whose sign differs."""
    x = np.asarray(x, dtype=np.float64)
    s = x >= 0
    return _scalar(np.mean(s[..., 1:] != s[..., :-1], axis=-1))


def _central_moments(x):
    x = np.asarray(x, dtype=np.float64)
    d = x - x.mean(axis=-1, keepdims=True)
    d2 = d * d
    return d, d2.mean(axis=-1), (d2 * d).mean(axis=-1), (d2 * d2).mean(axis=-1)


def skewness(x):
    """m3 / m2**1.5 with biased central moments; 0 for zero-variance input."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 3:
        raise ValidationError("skewness needs at least 3 samples")
    _, m2, m3, _ = _central_moments(x)
    ok = m2 > 0
    out = np.where(ok, m3 / np.where(ok, m2, 1.0) ** 1.5, 0.0)
    return _scalar(out)


def kurtosis(x):
    """Excess kurtosis m4 / m2**2 - 3; 0 for zero-variance input."""
    x = np.asarray(x, dtype=np.float64)
    _, m2, _, m4 = _central_moments(x)
    ok = m2 > 0
    out = np.where(ok, m4 / np.where(ok, m2, 1.0) ** 2 - 3.0, 0.0)
    return _scalar(out)


def katz_fractal_dimension(x):
    """Katz waveform fractal dimension with unit sample spacing.

    ``n`` is the number of steps (samples - 1), ``L`` the curve length and
    ``d`` the largest distance from the first sample.
    """
    x = np.asarray(x, dtype=np.float64)
    n_samples = x.shape[-1]
    if n_samples < 2:
        raise ValidationError("Katz FD needs at least 2 samples")
    n = n_samples - 1
    if n == 1:
        return _scalar(np.ones(x.shape[:-1]))
    dx = np.diff(x, axis=-1)
    L = np.sqrt(1.0 + dx * dx).sum(axis=-1)
    i = np.arange(n_samples, dtype=np.float64)
    excursion = x - x[..., :1]
    d = np.sqrt(i * i + excursion * excursion).max(axis=-1)
    logn = np.log10(n)
    fd = logn / (logn + np.log10(d / L))
    return _scalar(np.maximum(fd, 1.0))


def higuchi_fractal_dimension(x, kmax: int = 10):
    """Higuchi fractal dimension (slope of log L(k) against log 1/k)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if n < 2 * kmax + 1:
        raise ValidationError("frame too short for the requested Higuchi kmax")
    batch = x.reshape(-1, n)
    ks = np.arange(1, kmax + 1)
    logL = np.empty((batch.shape[0], kmax))
    for ki, k in enumerate(ks):
        acc = np.zeros(batch.shape[0])
        for m in range(k):
            seg = batch[:, m::k]
            cnt = seg.shape[1] - 1
            if cnt < 1:
                continue
            acc += np.abs(np.diff(seg, axis=1)).sum(axis=1) * (n - 1) / (cnt * k) / k
        logL[:, ki] = np.log(acc / k + _TINY)
    lx = np.log(1.0 / ks)
    lx = lx - lx.mean()
    slope = (logL - logL.mean(axis=1, keepdims=True)) @ lx / (lx @ lx)
    return _scalar(slope.reshape(x.shape[:-1]))


def autocorrelation(x, order: int):
    """Biased autocorrelation r(0..order-1), r(k) = (1/n) sum x[t] x[t+k]."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if not n > order:
        raise ValidationError(f"autocorrelation order {order} too large for {n} samples")
    r = np.empty(x.shape[:-1] + (order,))
    for k in range(order):
        r[..., k] = np.einsum("...i,...i->...", x[..., : n - k], x[..., k:]) / n
    return r


def autocorr_matrix(x, order: int = 10):
    r = autocorrelation(x, order)
    idx = np.abs(np.subtract.outer(np.arange(order), np.arange(order)))
    return r[..., idx]


def autocorr_condition_number(x, order: int = 10):
    """log10 of the eigenvalue spread of the Toeplitz autocorrelation matrix.

    Ratios beyond 1e12 (numerically singular matrices) clamp to 12.
    """
    if order < 2:
        raise ValidationError("order must be >= 2")
    return _scalar(_cond_from_lags(autocorrelation(x, order)))


def _cond_from_lags(r):
    order = r.shape[-1]
    idx = np.abs(np.subtract.outer(np.arange(order), np.arange(order)))
    ev = np.linalg.eigvalsh(r[..., idx])
    lmin, lmax = ev[..., 0], ev[..., -1]
    singular = ~(lmin > lmax / COND_CLAMP) | ~(lmax > 0)
    ratio = np.where(singular, COND_CLAMP, lmax / np.where(singular, 1.0, lmin))
    return np.clip(np.log10(ratio), 0.0, np.log10(COND_CLAMP))


# ---------------------------------------------------------------------------
# spectral features
# ---------------------------------------------------------------------------

def fft_length(n: int) -> int:
    return 1 << max(0, int(np.ceil(np.log2(n))))


def power_spectrum(x, sample_rate: int):
    """Hann-windowed power spectrum, FFT length = next power of two."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    nfft = fft_length(n)
    win = sps.get_window("hann", n)
    spec = np.fft.rfft(x * win, n=nfft, axis=-1)
    P = spec.real ** 2 + spec.imag ** 2
    return np.fft.rfftfreq(nfft, 1.0 / sample_rate), P


def spectral_centroid(freqs, P):
    tot = P.sum(axis=-1)
    return _scalar(np.where(tot > 0, (P @ freqs) / np.where(tot > 0, tot, 1.0), 0.0))


def spectral_rolloff(freqs, P, fraction: float = 0.85):
    c = np.cumsum(P, axis=-1)
    tot = c[..., -1:]
    idx = np.argmax(c >= fraction * tot, axis=-1)
    return _scalar(np.where(tot[..., 0] > 0, freqs[idx], 0.0))


def spectral_flatness(P):
    Pt = P + _TINY
    return _scalar(np.exp(np.mean(np.log(Pt), axis=-1)) / np.mean(Pt, axis=-1))


def band_log_ratios(freqs, P, bands, sample_rate: int):
    """log10(band energy / total energy) per band; the top band includes Nyquist."""
    tot = P.sum(axis=-1)
    nyq = sample_rate / 2.0
    out = []
    for lo, hi in bands:
        if hi >= nyq:
            mask = freqs >= lo
        else:
            mask = (freqs >= lo) & (freqs < hi)
        e = P[..., mask].sum(axis=-1)
        out.append(np.log10(e / np.where(tot > 0, tot, 1.0) + 1e-12))
    return np.stack(out, axis=-1)


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def compute_features(frames, sample_rate: int, config: FeatureConfig = FeatureConfig(),
                     degenerate=None) -> np.ndarray:
    """Feature matrix (n_frames, n_features) for normalized frames.

    Time-domain statistics come from one compiled pass per frame; they agree
    with the standalone functions above to rounding. Degenerate rows and
    any non-finite entries come back as 0.
    """
    frames = np.ascontiguousarray(np.atleast_2d(np.asarray(frames, dtype=np.float64)))
    names = config.names
    need = set(names)
    cols: dict[str, np.ndarray] = {}
    td = time_domain_stats(frames, config.ac_order)
    for j, key in enumerate(("log_energy", "zcr", "skewness", "kurtosis")):
        cols[key] = td[:, j]
    if "fractal_dim" in need:
        if config.fd_method == "katz":
            cols["fractal_dim"] = td[:, 4]
        else:
            cols["fractal_dim"] = np.atleast_1d(higuchi_fractal_dimension(frames, config.higuchi_kmax))
    if "log_cond" in need:
        cols["log_cond"] = _cond_from_lags(td[:, 5:])
    band_names = [_band_name(lo, hi) for lo, hi in config.bands]
    spectral = {"spectral_centroid", "spectral_rolloff", "spectral_flatness", *band_names}
    if need & spectral:
        freqs, P = power_spectrum(frames, sample_rate)
        if "spectral_centroid" in need:
            cols["spectral_centroid"] = np.atleast_1d(spectral_centroid(freqs, P))
        if "spectral_rolloff" in need:
            cols["spectral_rolloff"] = np.atleast_1d(spectral_rolloff(freqs, P, config.rolloff))
        if "spectral_flatness" in need:
            cols["spectral_flatness"] = np.atleast_1d(spectral_flatness(P))
        if need & set(band_names):
            ratios = band_log_ratios(freqs, P, config.bands, sample_rate)
            for j, bn in enumerate(band_names):
                cols[bn] = ratios[:, j]
    out = np.column_stack([cols[n] for n in names])
    out[~np.isfinite(out)] = 0.0
    if degenerate is not None:
        out[np.asarray(degenerate, dtype=bool)] = 0.0
    return out


def extract_features(frame: WindowFrame, config: FeatureConfig = FeatureConfig(),
                     sample_rate: int = 16000) -> FeatureVector:
    """Feature vector for one normalized frame (zeros if it is degenerate)."""
    names = config.names
    if frame.degenerate:
        values = np.zeros(len(names))
    else:
        values = compute_features(frame.samples[None, :], sample_rate, config)[0]
    return FeatureVector(values=values, names=names, window_start_s=frame.start_s)


def extract_channel_features(x, sample_rate: int, size_s: float, step_s: float,
                             config: FeatureConfig = FeatureConfig(),
                             chunk: int = 2048) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Segment, normalize and featurize a whole channel.

    Returns ``(window_start_s, values, degenerate)``.
    """
    win, step = samples_per(size_s, sample_rate), samples_per(step_s, sample_rate)
    frames = frame_matrix(np.asarray(x), win, step)
    m = len(frames)
    values = np.zeros((m, len(config.names)))
    degenerate = np.zeros(m, dtype=bool)
    for lo in range(0, m, chunk):
        norm, deg = normalize_frames(frames[lo: lo + chunk])
        values[lo: lo + chunk] = compute_features(norm, sample_rate, config, deg)
        degenerate[lo: lo + chunk] = deg
    return np.arange(m) * step / sample_rate, values, degenerate
