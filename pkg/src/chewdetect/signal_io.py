"""Audio, annotation and manifest loading.

File formats
------------
* WAV: RIFF PCM (16/24/32 bit integer) or IEEE float (32/64 bit). Compressed
  payloads are rejected with :class:`DecodeUnsupportedError`.
* Annotation CSV: header ``start_s,stop_s,label`` with label in
  ``{chew, meal}`` (detected-event exports also use ``bout``).
* Manifest JSON: ``[{"subject_id", "recording_id", "wav_path",
  "annotation_path"}, ...]``; relative paths resolve against the manifest.
"""
from __future__ import annotations

import csv
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.io import wavfile

from .errors import (AnnotationError, DecodeUnsupportedError, ManifestError,
                     RateMismatchError, WavFormatError)

log = logging.getLogger(__name__)

DEFAULT_SAMPLE_RATE = 16000
# all interval comparisons tolerate this much slack (seconds)
TIME_EPS = 1e-3

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE
_LABELS = ("chew", "bout", "meal")


@dataclass(frozen=True)
class AudioRecording:
    """Multichannel recording; ``channels`` has shape (n_channels, n_samples).

    Channel 0 is the left microphone, channel 1 the right one.
    """
    subject_id: str
    recording_id: str
    sample_rate_hz: int
    channels: np.ndarray
    clipped_samples: int = 0

    def __post_init__(self):
        ch = np.asarray(self.channels)
        if ch.ndim == 1:
            ch = ch[None, :]
        if ch.ndim != 2 or ch.shape[0] not in (1, 2):
            raise WavFormatError(f"expected 1 or 2 channels, got shape {ch.shape}")
        if self.sample_rate_hz <= 0:
            raise WavFormatError("sample rate must be positive")
        ch.setflags(write=False)
        object.__setattr__(self, "channels", ch)

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


@dataclass(frozen=True)
class Interval:
    start_s: float
    stop_s: float
    label: str

    @property
    def duration_s(self) -> float:
        return self.stop_s - self.start_s


@dataclass(frozen=True)
class AnnotationSet:
    chews: tuple[Interval, ...] = ()
    meals: tuple[Interval, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "chews", tuple(self.chews))
        object.__setattr__(self, "meals", tuple(self.meals))
        _check_intervals(self.chews, "chew")
        _check_intervals(self.meals, "meal")

    def chew_array(self) -> np.ndarray:
        return np.array([(c.start_s, c.stop_s) for c in self.chews], dtype=float).reshape(-1, 2)

    def meal_array(self) -> np.ndarray:
        return np.array([(m.start_s, m.stop_s) for m in self.meals], dtype=float).reshape(-1, 2)

    def validate_within(self, duration_s: float) -> None:
        for iv in self.chews + self.meals:
            if iv.start_s < -TIME_EPS or iv.stop_s > duration_s + TIME_EPS:
                raise AnnotationError(
                    f"{iv.label} interval [{iv.start_s}, {iv.stop_s}] outside [0, {duration_s}]")


@dataclass(frozen=True)
class ManifestEntry:
    subject_id: str
    recording_id: str
    wav_path: Path
    annotation_path: Path | None


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)

    @property
    def subjects(self) -> list[str]:
        seen: dict[str, None] = {}
        for e in self.entries:
            seen.setdefault(e.subject_id, None)
        return list(seen)

    def by_subject(self, subject_id: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.subject_id == subject_id]


def _check_intervals(intervals: Sequence[Interval], label: str) -> None:
    prev = None
    for iv in intervals:
        if iv.label != label:
            raise AnnotationError(f"interval labelled {iv.label!r} stored as {label!r}")
        if not iv.stop_s > iv.start_s:
            raise AnnotationError(f"{label} interval has stop <= start: [{iv.start_s}, {iv.stop_s}]")
        if prev is not None:
            if iv.start_s < prev.start_s:
                raise AnnotationError(f"{label} intervals not sorted by start")
            if iv.start_s < prev.stop_s - TIME_EPS:
                raise AnnotationError(
                    f"overlapping {label} intervals [{prev.start_s}, {prev.stop_s}] "
                    f"and [{iv.start_s}, {iv.stop_s}]")
        prev = iv


# ---------------------------------------------------------------------------
# WAV
# ---------------------------------------------------------------------------

def _read_fmt_chunk(path: Path) -> tuple[int, int, int, int]:
    """Return (format_tag, channels, sample_rate, bits_per_sample)."""
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) < 12 or head[:4] not in (b"RIFF", b"RIFX") or head[8:12] != b"WAVE":
            raise WavFormatError(f"{path}: not a RIFF/WAVE file")
        endian = "<" if head[:4] == b"RIFF" else ">"
        while True:
            hdr = fh.read(8)
            if len(hdr) < 8:
                raise WavFormatError(f"{path}: no fmt chunk")
            cid, size = hdr[:4], struct.unpack(endian + "I", hdr[4:])[0]
            if cid == b"fmt ":
                body = fh.read(size)
                if len(body) < 16:
                    raise WavFormatError(f"{path}: truncated fmt chunk")
                tag, nch, rate, _, _, bits = struct.unpack(endian + "HHIIHH", body[:16])
                if tag == _WAVE_FORMAT_EXTENSIBLE:
                    if len(body) < 26:
                        raise WavFormatError(f"{path}: truncated extensible fmt chunk")
                    tag = struct.unpack(endian + "H", body[24:26])[0]
                return tag, nch, rate, bits
            fh.seek(size + (size & 1), 1)


def load_wav(path, subject_id: str | None = None, recording_id: str | None = None,
             expected_rate: int = DEFAULT_SAMPLE_RATE,
             allow_rate_mismatch: bool = False) -> AudioRecording:
    """Read a PCM/float WAV file into a normalized :class:`AudioRecording`.

    Integer PCM is divided by ``2**(bits-1)``; float data is clipped to
    [-1, 1] and the number of clipped samples is recorded.
    """
    path = Path(path)
    if not path.is_file():
        raise WavFormatError(f"{path}: no such file")
    tag, nch, rate, bits = _read_fmt_chunk(path)
    if tag not in (_WAVE_FORMAT_PCM, _WAVE_FORMAT_IEEE_FLOAT):
        raise DecodeUnsupportedError(
            f"{path}: decode unsupported for WAV format tag 0x{tag:04x}; "
            "convert to PCM WAV first")
    if rate != expected_rate and not allow_rate_mismatch:
        raise RateMismatchError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise WavFormatError(f"{path}: {exc}") from exc

    data = np.asarray(data)
    if data.ndim == 1:
        data = data[:, None]
    clipped = 0
    if data.dtype.kind == "f":
        out = data.astype(np.float32)
        clipped = int(np.count_nonzero(np.abs(out) > 1.0))
        if clipped:
            log.warning("%s: clipped %d float samples to [-1, 1]", path, clipped)
            np.clip(out, -1.0, 1.0, out=out)
    elif data.dtype == np.uint8:
        out = (data.astype(np.float32) - 128.0) / 128.0
    elif data.dtype.kind == "i":
        # scipy left-justifies 24-bit samples into int32
        out = data.astype(np.float32) / float(2 ** (8 * data.dtype.itemsize - 1))
    else:
        raise DecodeUnsupportedError(f"{path}: unsupported sample type {data.dtype}")

    if out.shape[1] not in (1, 2):
        raise WavFormatError(f"{path}: {out.shape[1]} channels, only mono/stereo supported")
    return AudioRecording(
        subject_id=subject_id if subject_id is not None else path.stem,
        recording_id=recording_id if recording_id is not None else path.stem,
        sample_rate_hz=int(rate),
        channels=np.ascontiguousarray(out.T),
        clipped_samples=clipped,
    )


def write_wav(path, recording: AudioRecording) -> None:
    """Write ``recording`` as 16-bit PCM."""
    pcm = np.clip(np.asarray(recording.channels, dtype=np.float64), -1.0, 1.0)
    pcm = np.round(pcm * 32767.0).astype(np.int16)
    wavfile.write(Path(path), recording.sample_rate_hz, np.ascontiguousarray(pcm.T))


# ---------------------------------------------------------------------------
# annotations
# ---------------------------------------------------------------------------

def load_annotations(path, duration_s: float | None = None) -> AnnotationSet:
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise AnnotationError(f"{path}: {exc}") from exc
    chews, meals = [], []
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["start_s", "stop_s", "label"]:
            raise AnnotationError(f"{path}: expected header 'start_s,stop_s,label'")
        for lineno, row in enumerate(reader, start=2):
            try:
                start, stop = float(row["start_s"]), float(row["stop_s"])
            except (TypeError, ValueError) as exc:
                raise AnnotationError(f"{path}:{lineno}: bad number") from exc
            label = (row["label"] or "").strip()
            if stop <= start:
                raise AnnotationError(f"{path}:{lineno}: stop_s <= start_s")
            if label == "chew":
                chews.append(Interval(start, stop, label))
            elif label == "meal":
                meals.append(Interval(start, stop, label))
            else:
                raise AnnotationError(f"{path}:{lineno}: unknown label {label!r}")
    key = lambda iv: (iv.start_s, iv.stop_s)
    ann = AnnotationSet(chews=tuple(sorted(chews, key=key)), meals=tuple(sorted(meals, key=key)))
    if duration_s is not None:
        ann.validate_within(duration_s)
    return ann


def write_intervals_csv(path, intervals: Iterable[tuple[float, float, str]]) -> None:
    """Write ``start_s,stop_s,label`` rows with seconds at 3 decimals."""
    rows = sorted(intervals, key=lambda r: (r[0], r[1], r[2]))
    with open(path, "w", newline="") as fh:
        fh.write("start_s,stop_s,label\n")
        for start, stop, label in rows:
            if label not in _LABELS:
                raise AnnotationError(f"unknown label {label!r}")
            fh.write(f"{start:.3f},{stop:.3f},{label}\n")


def write_annotations(path, annotations: AnnotationSet) -> None:
    write_intervals_csv(path, [(iv.start_s, iv.stop_s, iv.label)
                               for iv in annotations.chews + annotations.meals])


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    if not isinstance(raw, list):
        raise ManifestError(f"{path}: manifest must be a JSON array")
    base = path.parent
    entries, seen = [], set()
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise ManifestError(f"{path}: entry {i} is not an object")
        try:
            sid, rid, wav = str(item["subject_id"]), str(item["recording_id"]), item["wav_path"]
        except KeyError as exc:
            raise ManifestError(f"{path}: entry {i} missing {exc}") from exc
        if not sid:
            raise ManifestError(f"{path}: entry {i} has empty subject_id")
        if (sid, rid) in seen:
            raise ManifestError(f"{path}: duplicate recording ({sid}, {rid})")
        seen.add((sid, rid))
        ann = item.get("annotation_path")
        entries.append(ManifestEntry(
            subject_id=sid, recording_id=rid,
            wav_path=(base / wav) if not Path(wav).is_absolute() else Path(wav),
            annotation_path=None if ann is None else ((base / ann) if not Path(ann).is_absolute() else Path(ann)),
        ))
    return DatasetManifest(entries=tuple(entries))


def write_manifest(path, manifest: DatasetManifest) -> None:
    path = Path(path)
    base = path.parent.resolve()

    def rel(p):
        if p is None:
            return None
        p = Path(p).resolve()
        try:
            return str(p.relative_to(base))
        except ValueError:
            return str(p)

    data = [{"subject_id": e.subject_id, "recording_id": e.recording_id,
             "wav_path": rel(e.wav_path), "annotation_path": rel(e.annotation_path)}
            for e in manifest.entries]
    path.write_text(json.dumps(data, indent=2) + "\n")
