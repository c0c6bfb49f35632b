import json
import struct

import numpy as np
import pytest
from scipy.io import wavfile

from chewdetect.errors import (AnnotationError, DecodeUnsupportedError, ManifestError,
                               RateMismatchError, WavFormatError)
from chewdetect.signal_io import (AnnotationSet, AudioRecording, Interval, load_annotations,
                                  load_manifest, load_wav, write_annotations, write_wav)


def _stereo(n=1600):
    t = np.arange(n) / 16000
    return np.stack([0.5 * np.sin(2 * np.pi * 440 * t), 0.25 * np.sin(2 * np.pi * 220 * t)])


def test_pcm16_roundtrip(tmp_path):
    rec = AudioRecording("S1", "R1", 16000, _stereo().astype(np.float32))
    write_wav(tmp_path / "a.wav", rec)
    back = load_wav(tmp_path / "a.wav", "S1", "R1")
    assert back.channels.shape == (2, 1600)
    assert back.channels.dtype == np.float32
    assert np.max(np.abs(back.channels - rec.channels)) < 1.0 / 32767
    assert back.duration_s == pytest.approx(0.1)


def test_int_scaling(tmp_path):
    data = np.array([[-32768, 16384], [0, -16384]], dtype=np.int16)
    wavfile.write(tmp_path / "i.wav", 16000, data)
    rec = load_wav(tmp_path / "i.wav")
    assert rec.channels[0].tolist() == [-1.0, 0.0]
    assert rec.channels[1].tolist() == [0.5, -0.5]


def test_float_clipping_counted(tmp_path):
    data = np.array([0.5, 1.5, -2.0, 0.0], dtype=np.float32)
    wavfile.write(tmp_path / "f.wav", 16000, data)
    rec = load_wav(tmp_path / "f.wav")
    assert rec.clipped_samples == 2
    assert rec.channels[0].tolist() == [0.5, 1.0, -1.0, 0.0]
    assert rec.n_channels == 1


def test_rate_mismatch(tmp_path):
    wavfile.write(tmp_path / "r.wav", 8000, np.zeros(100, dtype=np.int16))
    with pytest.raises(RateMismatchError):
        load_wav(tmp_path / "r.wav")
    assert load_wav(tmp_path / "r.wav", allow_rate_mismatch=True).sample_rate_hz == 8000


def test_compressed_format_rejected(tmp_path):
    # minimal RIFF with an A-law (0x0006) fmt chunk
    fmt = struct.pack("<HHIIHH", 6, 1, 16000, 16000, 1, 8)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", 4) + b"\0" * 4
    (tmp_path / "c.wav").write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    with pytest.raises(DecodeUnsupportedError, match="decode unsupported"):
        load_wav(tmp_path / "c.wav")


def test_not_a_wav(tmp_path):
    (tmp_path / "x.wav").write_bytes(b"hello world, not audio")
    with pytest.raises(WavFormatError):
        load_wav(tmp_path / "x.wav")
    with pytest.raises(WavFormatError):
        load_wav(tmp_path / "missing.wav")


def test_annotation_roundtrip(tmp_path):
    ann = AnnotationSet(chews=(Interval(1.0, 1.35, "chew"), Interval(2.0, 2.3, "chew")),
                        meals=(Interval(0.5, 40.0, "meal"),))
    write_annotations(tmp_path / "a.csv", ann)
    back = load_annotations(tmp_path / "a.csv", duration_s=60.0)
    assert back == ann
    assert back.chew_array().shape == (2, 2)


def test_annotation_errors(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("start_s,stop_s,label\n1.0,0.5,chew\n")
    with pytest.raises(AnnotationError):
        load_annotations(p)
    p.write_text("start_s,stop_s,label\n1.0,2.0,chew\n1.5,2.5,chew\n")
    with pytest.raises(AnnotationError, match="overlapping"):
        load_annotations(p)
    p.write_text("start_s,stop_s,label\n1.0,2.0,burp\n")
    with pytest.raises(AnnotationError):
        load_annotations(p)
    p.write_text("a,b,c\n")
    with pytest.raises(AnnotationError):
        load_annotations(p)
    p.write_text("start_s,stop_s,label\n50.0,70.0,meal\n")
    with pytest.raises(AnnotationError):
        load_annotations(p, duration_s=60.0)


def test_touching_chews_allowed(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("start_s,stop_s,label\n1.0,1.3,chew\n1.3,1.6,chew\n")
    assert len(load_annotations(p).chews) == 2


def test_manifest(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps([
        {"subject_id": "A", "recording_id": "A1", "wav_path": "a1.wav", "annotation_path": "a1.csv"},
        {"subject_id": "A", "recording_id": "A2", "wav_path": "/abs/a2.wav"},
        {"subject_id": "B", "recording_id": "B1", "wav_path": "b1.wav"},
    ]))
    m = load_manifest(p)
    assert m.subjects == ["A", "B"]
    assert [e.recording_id for e in m.by_subject("A")] == ["A1", "A2"]
    assert m.entries[0].wav_path == tmp_path / "a1.wav"
    assert str(m.entries[1].wav_path) == "/abs/a2.wav"
    assert m.entries[1].annotation_path is None


def test_manifest_errors(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps([{"subject_id": "A", "recording_id": "1", "wav_path": "x"}] * 2))
    with pytest.raises(ManifestError, match="duplicate"):
        load_manifest(p)
    p.write_text(json.dumps([{"subject_id": "", "recording_id": "1", "wav_path": "x"}]))
    with pytest.raises(ManifestError):
        load_manifest(p)
    p.write_text("{not json")
    with pytest.raises(ManifestError):
        load_manifest(p)
