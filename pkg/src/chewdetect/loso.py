"""Dataset feature extraction and the leave-one-subject-out experiment."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import RunConfig
from .errors import ValidationError
from .evaluation import (PrCurve, ScoredRecording, default_thresholds, pr_curve,
                         precision_recall_f1, subject_confusions, summarize,
                         window_truth_labels)
from .features import FeatureMatrix, extract_channel_features
from .fusion import LEFT, RIGHT, fuse_late_max, fuse_late_stacked
from .postprocess import EventList, ScoreSeries, chews_to_meals, smooth_scores
from .preprocessing import highpass
from .signal_io import AudioRecording, DatasetManifest, ManifestEntry, load_annotations, load_wav
from .svm import SvmModel, balanced_subsample, train_svm
from .tuning import tune_hyperparams

log = logging.getLogger(__name__)

REPORT_VERSION = "chewdetect-report-v1"
BUNDLE_VERSION = "chewdetect-bundle-v1"
# score assigned to windows whose every input channel is degenerate (silent)
DEGENERATE_SCORE = -1.0


def channels_for_mode(mode: str) -> tuple[int, ...]:
    return {"left": (LEFT,), "right": (RIGHT,)}.get(mode, (LEFT, RIGHT))


@dataclass
class RecordingData:
    """Per-window features (one matrix per channel) plus ground truth."""
    subject_id: str
    recording_id: str
    duration_s: float
    size_s: float
    step_s: float
    window_start_s: np.ndarray
    features: dict[int, np.ndarray]
    degenerate: dict[int, np.ndarray]
    names: tuple[str, ...]
    truth_labels: np.ndarray
    truth_chews: EventList
    truth_meals: EventList

    def design(self, channels: Sequence[int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(X, any-degenerate, all-degenerate) for the given channel list."""
        missing = [c for c in channels if c not in self.features]
        if missing:
            raise ValidationError(f"{self.recording_id}: channel(s) {missing} not extracted")
        X = np.hstack([self.features[c] for c in channels])
        degs = np.vstack([self.degenerate[c] for c in channels])
        return X, degs.any(axis=0), degs.all(axis=0)


def channel_features(audio: AudioRecording, config: RunConfig, channels: Sequence[int]):
    """High-pass (if enabled) and extract per-channel features.

    Returns (window starts, {channel: features}, {channel: degenerate}).
    """
    if max(channels) >= audio.n_channels:
        raise ValidationError(
            f"{audio.recording_id}: channel mode {config.channel_mode!r} needs "
            f"{max(channels) + 1} channels, file has {audio.n_channels}")
    if config.highpass:
        audio = highpass(audio, config.highpass_cutoff_hz)
    feats, degs, starts = {}, {}, None
    for c in channels:
        starts, X, deg = extract_channel_features(
            audio.channels[c], audio.sample_rate_hz, config.window_size_s,
            config.window_step_s, config.features)
        feats[c], degs[c] = X, deg
    return starts, feats, degs


def recording_data(audio: AudioRecording, annotations, config: RunConfig,
                   channels: Sequence[int] | None = None) -> RecordingData:
    """Features plus truth; ``annotations=None`` leaves the truth empty."""
    if channels is None:
        channels = channels_for_mode(config.channel_mode)
    starts, feats, degs = channel_features(audio, config, channels)
    if annotations is None:
        chews = EventList("chew", np.empty((0, 2)))
    else:
        chews = EventList("chew", annotations.chew_array())
    labels = window_truth_labels(starts, config.window_size_s, chews, config.truth_min_overlap)
    return RecordingData(
        subject_id=audio.subject_id, recording_id=audio.recording_id,
        duration_s=audio.duration_s, size_s=config.window_size_s, step_s=config.window_step_s,
        window_start_s=starts, features=feats, degenerate=degs, names=config.features.names,
        truth_labels=labels, truth_chews=chews,
        truth_meals=chews_to_meals(chews, config.aggregation))


def _extract_entry(args) -> RecordingData:
    entry, config, channels = args
    audio = load_wav(entry.wav_path, entry.subject_id, entry.recording_id,
                     expected_rate=config.sample_rate_hz)
    if entry.annotation_path is None:
        raise ValidationError(f"{entry.recording_id}: annotation_path required for evaluation")
    ann = load_annotations(entry.annotation_path, duration_s=audio.duration_s)
    return recording_data(audio, ann, config, channels)


def _map(fn: Callable, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def extract_dataset(manifest: DatasetManifest, config: RunConfig,
                    channels: Sequence[int] | None = None) -> list[RecordingData]:
    if channels is None:
        channels = channels_for_mode(config.channel_mode)
    items = [(e, config, tuple(channels)) for e in manifest.entries]
    return _map(_extract_entry, items, config.jobs)


# ---------------------------------------------------------------------------
# fold training
# ---------------------------------------------------------------------------

@dataclass
class FoldModel:
    mode: str
    models: dict[str, SvmModel]
    tuning: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"version": BUNDLE_VERSION, "channel_mode": self.mode, "tuning": self.tuning,
                "models": {k: m.to_dict() for k, m in sorted(self.models.items())}}

    @classmethod
    def from_dict(cls, d: dict) -> "FoldModel":
        if d.get("version") != BUNDLE_VERSION:
            raise ValidationError(f"unsupported model bundle version {d.get('version')!r}")
        mode = d.get("channel_mode")
        need = {"left": {"main"}, "right": {"main"}, "early": {"main"},
                "late-max": {"left", "right"}, "late-stacked": {"left", "right", "meta"}}.get(mode)
        if need is None:
            raise ValidationError(f"unknown channel mode {mode!r} in model bundle")
        models = {k: SvmModel.from_dict(v) for k, v in d.get("models", {}).items()}
        if not need <= set(models):
            raise ValidationError(f"model bundle for {mode!r} needs models {sorted(need)}")
        return cls(mode, models, d.get("tuning", {}))

    def save(self, path, config: RunConfig | None = None) -> None:
        d = self.to_dict()
        if config is not None:
            d["config"] = config.to_dict()
        Path(path).write_text(json.dumps(d, indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "FoldModel":
        path = Path(path)
        if not path.is_file():
            raise ValidationError(f"{path}: model file not found")
        try:
            return cls.from_dict(json.loads(path.read_text()))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValidationError(f"{path}: malformed model file ({exc})") from exc

    def raw_scores(self, rec: RecordingData) -> np.ndarray:
        if self.mode in ("left", "right", "early"):
            X, _, all_deg = rec.design(channels_for_mode(self.mode))
            s = self.models["main"].decision_function(X)
        else:
            XL, _, dl = rec.design((LEFT,))
            XR, _, dr = rec.design((RIGHT,))
            sl = self.models["left"].decision_function(XL)
            sr = self.models["right"].decision_function(XR)
            all_deg = dl & dr
            if self.mode == "late-max":
                s = fuse_late_max(sl, sr)
            else:
                s = self.models["meta"].decision_function(np.column_stack([sl, sr]))
        s = np.asarray(s, dtype=np.float64)
        s[all_deg] = DEGENERATE_SCORE
        return s


def _pool(recs: Sequence[RecordingData], channels: Sequence[int]) -> FeatureMatrix:
    Xs, ys, ts = [], [], []
    for r in recs:
        X, any_deg, _ = r.design(channels)
        keep = ~any_deg
        Xs.append(X[keep])
        ys.append(r.truth_labels[keep])
        ts.append(r.window_start_s[keep])
    return FeatureMatrix(values=np.vstack(Xs), names=(), window_start_s=np.concatenate(ts),
                         labels=np.concatenate(ys), subject_id="+".join(sorted({r.subject_id for r in recs})))


def _tuned_model(sub: FeatureMatrix, config: RunConfig, seed: int) -> tuple[SvmModel, dict]:
    res = tune_hyperparams(sub, folds=config.tuning_folds, budget=config.tuning_budget,
                           seed=seed, strategy=config.tuning_strategy, tol=config.svm_tol)
    model = train_svm(sub, res.C, res.gamma, tol=config.svm_tol)
    info = {"C": res.C, "gamma": res.gamma, "cv_f1": res.best_score,
            "evaluations": len(res.history), "n_support": int(len(model.alphas_signed))}
    return model, info


def fit_fold(train: Sequence[RecordingData], config: RunConfig, seed: int) -> FoldModel:
    mode = config.channel_mode
    if mode in ("left", "right", "early"):
        pool = _pool(train, channels_for_mode(mode))
        sub = balanced_subsample(pool, config.n_per_class, seed)
        model, info = _tuned_model(sub, config, seed)
        return FoldModel(mode, {"main": model}, {"main": info})

    # late fusion: one model per channel on the same windows
    pool = _pool(train, (LEFT, RIGHT))
    sub = balanced_subsample(pool, config.n_per_class, seed)
    d = sub.values.shape[1] // 2
    models, tuning = {}, {}
    for name, cols in (("left", slice(0, d)), ("right", slice(d, 2 * d))):
        part = replace(sub, values=sub.values[:, cols])
        models[name], tuning[name] = _tuned_model(part, config, seed)
    if mode == "late-stacked":
        meta_sub = balanced_subsample(pool, config.n_per_class, seed + 1)
        scores = np.column_stack([models["left"].decision_function(meta_sub.values[:, :d]),
                                  models["right"].decision_function(meta_sub.values[:, d:])])
        models["meta"] = fuse_late_stacked(scores, meta_sub.labels, config.meta_C,
                                           config.meta_gamma, config.svm_tol)
        tuning["meta"] = {"C": config.meta_C, "gamma": config.meta_gamma,
                          "n_support": int(len(models["meta"].alphas_signed))}
    return FoldModel(mode, models, tuning)


def fit_all(data: Sequence[RecordingData], config: RunConfig) -> FoldModel:
    """Tune and train on every recording (used for deployable models)."""
    return fit_fold(data, config, fold_seed(config.seed, 0))


def score_recording(model: FoldModel, rec: RecordingData, config: RunConfig) -> ScoredRecording:
    raw = ScoreSeries(rec.window_start_s, model.raw_scores(rec), rec.step_s)
    return ScoredRecording(
        subject_id=rec.subject_id, recording_id=rec.recording_id, raw=raw,
        smoothed=smooth_scores(raw, config.smoothing_windows), truth_labels=rec.truth_labels,
        truth_meals=rec.truth_meals, duration_s=rec.duration_s, size_s=rec.size_s)


# ---------------------------------------------------------------------------
# LOSO
# ---------------------------------------------------------------------------

@dataclass
class FoldResult:
    subject_id: str
    train_recordings: list[str]
    test_recordings: list[str]
    tuning: dict
    scored: list[ScoredRecording]


@dataclass
class LosoResult:
    config: RunConfig
    folds: list[FoldResult]
    report: dict
    pr: PrCurve | None = None


def fold_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), 7919, int(index)]).generate_state(1)[0])


def _run_fold(args) -> FoldResult:
    index, subject, data, config = args
    train = [r for r in data if r.subject_id != subject]
    test = [r for r in data if r.subject_id == subject]
    model = fit_fold(train, config, fold_seed(config.seed, index))
    return FoldResult(subject_id=subject,
                      train_recordings=[r.recording_id for r in train],
                      test_recordings=[r.recording_id for r in test],
                      tuning=model.tuning,
                      scored=[score_recording(model, r, config) for r in test])


def _metrics_block(conf) -> dict:
    out = conf.as_dict()
    out.update(precision_recall_f1(conf).as_dict())
    return out


def run_loso_on_data(data: Sequence[RecordingData], config: RunConfig,
                     with_pr: bool = True) -> LosoResult:
    subjects: list[str] = []
    for r in data:
        if r.subject_id not in subjects:
            subjects.append(r.subject_id)
    if len(subjects) < 2:
        raise ValidationError("leave-one-subject-out needs at least 2 subjects")
    args = [(i, s, list(data), config) for i, s in enumerate(subjects)]
    folds = _map(_run_fold, args, config.jobs)

    scored = [sr for f in folds for sr in f.scored]
    rows = []
    for f in folds:
        win = subject_confusions(f.scored, config.threshold, "window", config.aggregation, smoothed=False)
        dur = subject_confusions(f.scored, config.threshold, "duration", config.aggregation)
        rows.append({
            "subject_id": f.subject_id,
            "train_recordings": f.train_recordings,
            "test_recordings": f.test_recordings,
            "tuning": f.tuning,
            "window": _metrics_block(win[f.subject_id]),
            "duration": _metrics_block(dur[f.subject_id]),
        })
    summary = {mode: {m: summarize([r[mode][m] for r in rows]) for m in ("precision", "recall", "f1")}
               for mode in ("window", "duration")}
    report = {
        "version": REPORT_VERSION,
        "channel_mode": config.channel_mode,
        "seed": config.seed,
        "config": config.to_dict(),
        "subjects": rows,
        "summary": summary,
    }
    pr = None
    if with_pr:
        thresholds = default_thresholds(scored, config.pr_thresholds)
        pr = pr_curve(scored, thresholds, config.pr_mode, config.aggregation)
        report["pr_curve"] = {"mode": pr.mode, "auc": pr.auc, "auc_all_points": pr.auc_all_points, "points": [
            {"threshold": p.threshold, "precision": p.precision, "recall": p.recall}
            for p in pr.points]}
    return LosoResult(config=config, folds=folds, report=report, pr=pr)


def run_loso(manifest: DatasetManifest, config: RunConfig, with_pr: bool = True) -> LosoResult:
    if len(manifest.subjects) < 2:
        raise ValidationError("leave-one-subject-out needs at least 2 subjects")
    return run_loso_on_data(extract_dataset(manifest, config), config, with_pr=with_pr)


def window_study(manifest: DatasetManifest, config: RunConfig, sizes: Sequence[float],
                 steps: Sequence[float]) -> dict[tuple[float, float], dict]:
    """Window-level LOSO F1 (mean/std across subjects) per (size, step)."""
    if not sizes or not steps:
        raise ValidationError("window study needs at least one size and one step")
    grid = {}
    for size in sizes:
        for step in steps:
            cfg = replace(config, window_size_s=float(size), window_step_s=float(step))
            res = run_loso(manifest, cfg, with_pr=False)
            grid[(float(size), float(step))] = res.report["summary"]["window"]["f1"]
            log.info("window study size=%.2f step=%.2f f1=%s", size, step, grid[(size, step)]["text"])
    return grid


def write_grid_csv(path, grid: dict[tuple[float, float], dict]) -> None:
    with open(path, "w") as fh:
        fh.write("size_s,step_s,f1_mean,f1_std\n")
        for (size, step), s in sorted(grid.items()):
            fh.write(f"{size:.3f},{step:.3f},{s['mean']:.6f},{s['std']:.6f}\n")
