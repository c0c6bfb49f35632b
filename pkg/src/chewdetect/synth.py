"""Seeded synthetic stereo recordings with exact chew/meal ground truth.

A recording is a shuffled sequence of activity segments (eating, talking,
walking, rest) over a low-level noise floor:

* chews: band-limited noise bursts with a fast attack and exponential decay,
  grouped into bouts separated by pauses inside each meal;
* talking: glottal pulse train with drifting pitch through formant
  resonators, syllabic amplitude modulation and occasional fricative noise;
* walking: low-frequency damped thumps with a short click at each step;
* rest: the noise floor alone.

Each subject gets its own timbre (burst bandwidth, gain, voice pitch) so
leave-one-subject-out folds see genuinely different data.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .errors import ValidationError
from .signal_io import (AnnotationSet, AudioRecording, DatasetManifest, Interval,
                        ManifestEntry, write_annotations, write_manifest, write_wav)

log = logging.getLogger(__name__)

ACTIVITIES = ("eating", "talking", "walking", "rest")


@dataclass(frozen=True)
class SynthSpec:
    n_subjects: int = 5
    # one entry per subject, or a single int for all; the default mirrors
    # five subjects with six recordings (one subject recorded twice)
    recordings_per_subject: tuple[int, ...] | int = (2, 1, 1, 1, 1)
    duration_s: float = 3600.0
    sample_rate_hz: int = 16000
    chew_rate_hz: float = 1.5
    chew_duration_mean_s: float = 0.348
    chew_duration_std_s: float = 0.046
    meal_count: int = 2
    activity_mix: dict = field(default_factory=lambda: {
        "eating": 0.35, "talking": 0.25, "walking": 0.2, "rest": 0.2})
    bout_chews: tuple[int, int] = (8, 30)
    bout_pause_s: tuple[float, float] = (3.0, 15.0)
    chew_gain: float = 0.06
    talk_gain: float = 0.12
    walk_gain: float = 0.08
    # lower -> harder: scales the noise floor relative to the chew level
    snr_db: float = 26.0
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects < 1:
            raise ValidationError("n_subjects must be >= 1")
        rps = self.recordings_per_subject
        if isinstance(rps, int):
            rps = (rps,) * self.n_subjects
        rps = tuple(int(r) for r in rps)
        if len(rps) != self.n_subjects or min(rps) < 1:
            raise ValidationError("recordings_per_subject must give >= 1 recording per subject")
        object.__setattr__(self, "recordings_per_subject", rps)
        if self.duration_s <= 0 or self.sample_rate_hz <= 0:
            raise ValidationError("duration and sample rate must be positive")
        if self.chew_duration_mean_s <= 0 or self.chew_duration_std_s < 0 or self.chew_rate_hz <= 0:
            raise ValidationError("chew statistics must be positive")
        mix = dict(self.activity_mix)
        if set(mix) - set(ACTIVITIES) or any(v < 0 for v in mix.values()):
            raise ValidationError(f"activity mix keys must be among {ACTIVITIES} and non-negative")
        if abs(sum(mix.values()) - 1.0) > 1e-6:
            raise ValidationError("activity mix proportions must sum to 1")
        if mix.get("eating", 0) > 0 and self.meal_count < 1:
            raise ValidationError("meal_count must be >= 1 when eating is present")
        object.__setattr__(self, "activity_mix", {a: float(mix.get(a, 0.0)) for a in ACTIVITIES})

    @property
    def noise_level(self) -> float:
        return self.chew_gain * 10 ** (-self.snr_db / 20.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["recordings_per_subject"] = list(self.recordings_per_subject)
        return d


@dataclass(frozen=True)
class SubjectTimbre:
    burst_lo_hz: float
    burst_hi_hz: float
    chew_gain: float
    right_gain: float
    f0_hz: float
    formants_hz: tuple[float, float, float]
    step_rate_hz: float


def subject_seed(base_seed: int, subject_index: int, recording_index: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(base_seed), int(subject_index), int(recording_index)])


def subject_timbre(spec: SynthSpec, subject_index: int) -> SubjectTimbre:
    rng = np.random.default_rng(subject_seed(spec.seed, subject_index, 10_000))
    return SubjectTimbre(
        burst_lo_hz=float(rng.uniform(300, 800)),
        burst_hi_hz=float(rng.uniform(2800, 4500)),
        chew_gain=float(spec.chew_gain * rng.uniform(0.7, 1.3)),
        right_gain=float(rng.uniform(0.85, 1.15)),
        f0_hz=float(rng.choice([rng.uniform(95, 140), rng.uniform(170, 250)])),
        formants_hz=(float(rng.uniform(450, 800)), float(rng.uniform(1100, 1900)),
                     float(rng.uniform(2400, 3200))),
        step_rate_hz=float(rng.uniform(1.6, 2.1)),
    )


# ---------------------------------------------------------------------------
# timeline
# ---------------------------------------------------------------------------

def _split(total: float, parts: int, rng) -> list[float]:
    if parts <= 1:
        return [total]
    w = rng.uniform(0.7, 1.3, parts)
    return list(total * w / w.sum())


def _timeline(spec: SynthSpec, rng) -> list[tuple[str, float, float]]:
    """Sequence of (activity, start, stop) covering [0, duration)."""
    dur = spec.duration_s
    mix = spec.activity_mix
    meals = _split(mix["eating"] * dur, spec.meal_count, rng) if mix["eating"] > 0 else []
    others = []
    for act in ("talking", "walking", "rest"):
        if mix[act] > 0:
            n = max(1, int(round(mix[act] * dur / 600.0)))
            others += [(act, d) for d in _split(mix[act] * dur, n, rng)]
    order = [others[i] for i in rng.permutation(len(others))]
    if meals:
        # keep at least one non-eating segment between consecutive meals
        slots = rng.choice(np.arange(len(order) + 1), size=len(meals), replace=len(order) + 1 < len(meals))
        slots = sorted(slots.tolist())
        merged, k = [], 0
        for i in range(len(order) + 1):
            while k < len(meals) and slots[k] == i:
                merged.append(("eating", meals[k]))
                k += 1
            if i < len(order):
                merged.append(order[i])
        order = merged
    t, out = 0.0, []
    for act, d in order:
        out.append((act, t, min(t + d, dur)))
        t += d
    return out


def _meal_chews(spec: SynthSpec, start: float, stop: float, rng) -> list[tuple[float, float]]:
    chews = []
    t = start + rng.uniform(1.0, 5.0)
    period = 1.0 / spec.chew_rate_hz
    while t < stop:
        n = int(rng.integers(spec.bout_chews[0], spec.bout_chews[1] + 1))
        for _ in range(n):
            d = float(np.clip(rng.normal(spec.chew_duration_mean_s, spec.chew_duration_std_s), 0.2, 0.5))
            if t + d > stop - 0.5:
                break
            chews.append((t, t + d))
            t = max(t + period * rng.uniform(0.85, 1.15), t + d + 0.08)
        t = chews[-1][1] + rng.uniform(*spec.bout_pause_s) if chews else t + 1.0
        if t > stop - 2.0:
            break
    return chews


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def _bandpassed_noise(n: int, lo: float, hi: float, fs: int, rng) -> np.ndarray:
    sos = sps.butter(4, [lo, hi], btype="bandpass", fs=fs, output="sos")
    x = sps.sosfilt(sos, rng.standard_normal(n))
    return x / (x.std() + 1e-12)


def _render_chews(out: np.ndarray, chews, timbre: SubjectTimbre, fs: int, rng) -> None:
    """Add chew bursts into ``out`` (mono, float64)."""
    if not chews:
        return
    lo = int(chews[0][0] * fs)
    hi = min(len(out), int(np.ceil(chews[-1][1] * fs)) + 1)
    carrier = _bandpassed_noise(hi - lo, timbre.burst_lo_hz, timbre.burst_hi_hz, fs, rng)
    env = np.zeros(hi - lo)
    for a, b in chews:
        i0, i1 = int(round(a * fs)) - lo, min(int(round(b * fs)) - lo, hi - lo)
        n = i1 - i0
        if n <= 0:
            continue
        t = np.arange(n) / fs
        attack = np.minimum(1.0, t / 0.015)
        shape = attack * np.exp(-t / ((b - a) / 3.0))
        env[i0:i1] += timbre.chew_gain * rng.uniform(0.6, 1.0) * shape
    out[lo:hi] += carrier * env


def _render_talking(out: np.ndarray, start: float, stop: float, timbre: SubjectTimbre,
                    gain: float, fs: int, rng) -> None:
    i0, i1 = int(start * fs), min(len(out), int(stop * fs))
    n = i1 - i0
    if n <= 0:
        return
    t = np.arange(n) / fs
    # pitch drift: slow sinusoid plus a smoothed random walk
    walk = np.cumsum(rng.standard_normal(n // 1600 + 2)) * 0.02
    walk = np.interp(t, np.arange(len(walk)) * 0.1, walk)
    f0 = timbre.f0_hz * (1.0 + 0.08 * np.sin(2 * np.pi * 0.25 * t + rng.uniform(0, 6.3)) + walk - walk.mean())
    f0 = np.clip(f0, 60.0, 400.0)
    phase = np.cumsum(f0) / fs
    pulses = np.diff(np.floor(phase), prepend=0.0)
    src = sps.lfilter([1.0], [1.0, -0.9], pulses)
    voiced = np.zeros(n)
    for fc, bw in zip(timbre.formants_hz, (120.0, 180.0, 250.0)):
        sos = sps.butter(2, [fc - bw, fc + bw], btype="bandpass", fs=fs, output="sos")
        voiced += sps.sosfilt(sos, src)
    voiced /= voiced.std() + 1e-12
    # syllables at ~4-5 Hz, phrases separated by short pauses
    syl_rate = rng.uniform(3.8, 5.0)
    syl = np.maximum(0.0, np.sin(2 * np.pi * syl_rate * t + rng.uniform(0, 6.3))) ** 1.5
    phrase = np.ones(n)
    pos = 0.0
    while pos < n / fs:
        pos += rng.uniform(1.5, 5.0)
        p0, p1 = int(pos * fs), int((pos + rng.uniform(0.2, 0.8)) * fs)
        phrase[p0:p1] = 0.0
        pos = p1 / fs
    phrase = np.convolve(phrase, np.ones(160) / 160, mode="same")
    sig = voiced * syl * phrase
    # fricatives
    fric = _bandpassed_noise(n, 3500.0, 7500.0, fs, rng)
    fenv = np.zeros(n)
    for c in rng.uniform(0, n / fs, int(n / fs * 0.8)):
        a, b = int(c * fs), int((c + rng.uniform(0.05, 0.12)) * fs)
        fenv[a:b] = rng.uniform(0.2, 0.5)
    fenv = np.convolve(fenv, np.ones(80) / 80, mode="same")
    sig = sig + fric * fenv
    out[i0:i1] += gain * sig / (np.sqrt(np.mean(sig ** 2)) + 1e-12)


def _render_walking(out: np.ndarray, start: float, stop: float, timbre: SubjectTimbre,
                    gain: float, fs: int, rng) -> None:
    i0, i1 = int(start * fs), min(len(out), int(stop * fs))
    if i1 <= i0:
        return
    tt = np.arange(int(0.25 * fs)) / fs
    pos = start + rng.uniform(0.0, 0.5)
    while pos < stop - 0.3:
        f = rng.uniform(40.0, 90.0)
        thump = np.sin(2 * np.pi * f * tt) * np.exp(-tt / 0.04)
        click = np.zeros_like(tt)
        nc = int(0.005 * fs)
        click[:nc] = rng.standard_normal(nc) * 0.3
        a = int(pos * fs)
        seg = gain * rng.uniform(0.7, 1.0) * (thump + click)
        b = min(a + len(seg), i1)
        out[a:b] += seg[: b - a]
        pos += (1.0 / timbre.step_rate_hz) * rng.uniform(0.9, 1.1)


def generate_recording(spec: SynthSpec, subject_index: int = 0, recording_index: int = 0,
                       subject_id: str | None = None,
                       recording_id: str | None = None) -> tuple[AudioRecording, AnnotationSet]:
    """Render one stereo recording and its exact annotations."""
    fs = spec.sample_rate_hz
    rng = np.random.default_rng(subject_seed(spec.seed, subject_index, recording_index))
    timbre = subject_timbre(spec, subject_index)
    n = int(round(spec.duration_s * fs))
    timeline = _timeline(spec, rng)

    source = np.zeros(n)
    chews_all, meals = [], []
    for act, a, b in timeline:
        if act == "eating":
            chews = _meal_chews(spec, a, b, rng)
            if chews:
                meals.append((a, b))
                chews_all += chews
                _render_chews(source, chews, timbre, fs, rng)
        elif act == "talking":
            _render_talking(source, a, b, timbre, spec.talk_gain, fs, rng)
        elif act == "walking":
            _render_walking(source, a, b, timbre, spec.walk_gain, fs, rng)

    channels = np.empty((2, n), dtype=np.float32)
    for ch, g in enumerate((1.0, timbre.right_gain)):
        floor = rng.standard_normal(n) * spec.noise_level
        channels[ch] = np.clip(g * source + floor, -1.0, 1.0)

    sid = subject_id if subject_id is not None else f"S{subject_index + 1:02d}"
    rid = recording_id if recording_id is not None else f"{sid}_R{recording_index + 1}"
    rec = AudioRecording(subject_id=sid, recording_id=rid, sample_rate_hz=fs, channels=channels)
    ann = AnnotationSet(
        chews=tuple(Interval(a, b, "chew") for a, b in chews_all),
        meals=tuple(Interval(a, b, "meal") for a, b in meals))
    return rec, ann


def generate_dataset(spec: SynthSpec, out_dir) -> Path:
    """Write WAV + annotation CSV per recording and a ``manifest.json``.

    Annotation times are rounded to milliseconds on disk, matching the CSV
    schema; returns the manifest path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for s in range(spec.n_subjects):
        for r in range(spec.recordings_per_subject[s]):
            rec, ann = generate_recording(spec, s, r)
            wav = out / f"{rec.recording_id}.wav"
            csv = out / f"{rec.recording_id}.csv"
            write_wav(wav, rec)
            write_annotations(csv, ann)
            entries.append(ManifestEntry(rec.subject_id, rec.recording_id, wav, csv))
            log.info("wrote %s (%.0f s, %d chews, %d meals)", wav.name, rec.duration_s,
                     len(ann.chews), len(ann.meals))
    manifest = out / "manifest.json"
    write_manifest(manifest, DatasetManifest(tuple(entries)))
    return manifest


def scaled_spec(spec: SynthSpec, **changes) -> SynthSpec:
    return replace(spec, **changes)
