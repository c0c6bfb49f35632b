"""Window-level and duration-based metrics, and precision-recall sweeps."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .postprocess import (AggregationParams, EventList, ScoreSeries, chews_to_meals,
                          labels_to_chews, threshold_labels)
from .signal_io import TIME_EPS


@dataclass(frozen=True)
class ConfusionCounts:
    """Counts in window mode, seconds in duration mode."""
    tp: float = 0.0
    fp: float = 0.0
    fn: float = 0.0
    tn: float = 0.0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValidationError("confusion counts must be non-negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self) -> float:
        return self.tp + self.fp + self.fn + self.tn

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    undefined: tuple[str, ...] = ()   # metrics that were 0/0 and reported as 0

    def __iter__(self):
        return iter((self.precision, self.recall, self.f1))

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "undefined": list(self.undefined)}


def f1_from_pr(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)


def precision_recall_f1(c: ConfusionCounts) -> PRF:
    undefined = []
    if c.tp + c.fp > 0:
        p = c.tp / (c.tp + c.fp)
    else:
        p = 0.0
        undefined.append("precision")
    if c.tp + c.fn > 0:
        r = c.tp / (c.tp + c.fn)
    else:
        r = 0.0
        undefined.append("recall")
    if p + r > 0:
        f1 = f1_from_pr(p, r)
    else:
        f1 = 0.0
        undefined.append("f1")
    return PRF(p, r, f1, tuple(undefined))


def window_confusion(pred, truth) -> ConfusionCounts:
    pred = np.asarray(pred).astype(bool)
    truth = np.asarray(truth).astype(bool)
    if pred.shape != truth.shape:
        raise ValidationError(f"label length mismatch: {pred.shape} vs {truth.shape}")
    return ConfusionCounts(
        tp=float(np.sum(pred & truth)), fp=float(np.sum(pred & ~truth)),
        fn=float(np.sum(~pred & truth)), tn=float(np.sum(~pred & ~truth)))


def _as_intervals(x) -> np.ndarray:
    if isinstance(x, EventList):
        return x.intervals
    return np.asarray(x, dtype=np.float64).reshape(-1, 2)


def window_truth_labels(window_start_s, size_s: float, chews, min_overlap: float = 0.5) -> np.ndarray:
    """1 where at least ``min_overlap`` of the window is covered by chews."""
    t = np.asarray(window_start_s, dtype=np.float64)
    iv = _as_intervals(chews)
    if len(iv) == 0:
        return np.zeros(len(t), dtype=np.int8)
    iv = iv[np.argsort(iv[:, 0], kind="stable")]
    starts, lengths = iv[:, 0], iv[:, 1] - iv[:, 0]
    before = np.concatenate([[0.0], np.cumsum(lengths)])

    def covered(x):
        k = np.searchsorted(starts, x, side="right") - 1
        kk = np.maximum(k, 0)
        part = np.clip(x - starts[kk], 0.0, lengths[kk])
        return np.where(k >= 0, before[kk] + part, 0.0)

    overlap = covered(t + size_s) - covered(t)
    return (overlap >= min_overlap * size_s - 1e-9).astype(np.int8)


def _exact_union(iv: np.ndarray) -> list[tuple[Fraction, Fraction]]:
    out: list[list[Fraction]] = []
    for a, b in sorted((Fraction(float(a)), Fraction(float(b))) for a, b in iv):
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def duration_confusion(pred, truth, total_s: float) -> ConfusionCounts:
    """Partition [0, total_s] into TP/FP/FN/TN time.

    Interval endpoints are converted to exact rationals so the four parts
    add up to ``total_s``.
    """
    P, T = _as_intervals(pred), _as_intervals(truth)
    for name, iv in (("pred", P), ("truth", T)):
        if len(iv) and (iv.min() < -TIME_EPS or iv.max() > total_s + TIME_EPS):
            raise ValidationError(f"{name} intervals exceed [0, {total_s}]")
    total = Fraction(float(total_s))

    def clip(u):
        return [(max(a, Fraction(0)), min(b, total)) for a, b in u if min(b, total) > max(a, Fraction(0))]

    pu, tu = clip(_exact_union(P)), clip(_exact_union(T))
    tp = Fraction(0)
    i = j = 0
    while i < len(pu) and j < len(tu):
        lo, hi = max(pu[i][0], tu[j][0]), min(pu[i][1], tu[j][1])
        if hi > lo:
            tp += hi - lo
        if pu[i][1] < tu[j][1]:
            i += 1
        else:
            j += 1
    p_tot = sum((b - a for a, b in pu), Fraction(0))
    t_tot = sum((b - a for a, b in tu), Fraction(0))
    fp, fn = p_tot - tp, t_tot - tp
    tn = total - tp - fp - fn
    return ConfusionCounts(float(tp), float(fp), float(fn), float(tn))


def summarize(values: Sequence[float]) -> dict:
    """Mean and sample standard deviation, plus a ``0.657 ± 0.078`` string."""
    v = np.asarray(values, dtype=np.float64)
    mean = float(v.mean()) if len(v) else 0.0
    std = float(v.std(ddof=1)) if len(v) > 1 else 0.0
    return {"mean": mean, "std": std, "text": f"{mean:.3f} ± {std:.3f}"}


# ---------------------------------------------------------------------------
# precision-recall sweep
# ---------------------------------------------------------------------------

@dataclass
class ScoredRecording:
    """Held-out recording: scores plus everything needed to evaluate them."""
    subject_id: str
    recording_id: str
    raw: ScoreSeries
    smoothed: ScoreSeries
    truth_labels: np.ndarray
    truth_meals: EventList
    duration_s: float
    size_s: float


@dataclass(frozen=True)
class PrPoint:
    threshold: float
    precision: float
    recall: float


@dataclass
class PrCurve:
    mode: str
    points: list[PrPoint] = field(default_factory=list)
    auc: float = 0.0           # area under the non-dominated operating points
    auc_all_points: float = 0.0

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("threshold,precision,recall\n")
            for p in self.points:
                fh.write(f"{p.threshold:.6f},{p.precision:.6f},{p.recall:.6f}\n")


def recording_confusion(rec: ScoredRecording, theta: float, mode: str,
                        params: AggregationParams = AggregationParams(),
                        smoothed: bool = True) -> ConfusionCounts:
    series = rec.smoothed if smoothed else rec.raw
    labels = threshold_labels(series, theta)
    if mode == "window":
        return window_confusion(labels, rec.truth_labels)
    if mode == "duration":
        t0 = float(series.window_start_s[0]) if len(series) else 0.0
        chews = labels_to_chews(labels, series.step_s, rec.size_s, params, t0=t0,
                                duration_s=rec.duration_s)
        return duration_confusion(chews_to_meals(chews, params), rec.truth_meals, rec.duration_s)
    raise ValidationError(f"unknown evaluation mode {mode!r}")


def subject_confusions(recordings: Sequence[ScoredRecording], theta: float, mode: str,
                       params: AggregationParams = AggregationParams(),
                       smoothed: bool = True) -> dict[str, ConfusionCounts]:
    """Counts pooled over each subject's recordings, in first-seen order."""
    out: dict[str, ConfusionCounts] = {}
    for rec in recordings:
        c = recording_confusion(rec, theta, mode, params, smoothed)
        out[rec.subject_id] = out.get(rec.subject_id, ConfusionCounts()) + c
    return out


def default_thresholds(recordings: Sequence[ScoredRecording], n: int = 101) -> np.ndarray:
    pooled = np.concatenate([r.smoothed.scores for r in recordings])
    return np.quantile(pooled, np.linspace(0.0, 1.0, n))


def pr_auc(points: Sequence[PrPoint]) -> float:
    """Trapezoid area over recall-sorted points, extended flat to recall 0."""
    if not points:
        return 0.0
    pts = sorted(((p.recall, p.precision) for p in points), key=lambda rp: (rp[0], -rp[1]))
    r = np.array([0.0] + [a for a, _ in pts])
    p = np.array([pts[0][1]] + [b for _, b in pts])
    area = float(np.sum(np.diff(r) * (p[1:] + p[:-1]) / 2.0))
    return float(np.clip(area, 0.0, 1.0))


def pareto_front(points: Sequence[PrPoint]) -> list[PrPoint]:
    """Operating points not beaten on both precision and recall by another.

    Duration-mode detection is not monotone in the threshold (low
    thresholds merge chews into over-long pulses that get discarded), so
    the raw point cloud can fold back on itself; the front is the curve of
    attainable trade-offs.
    """
    out = []
    for p in points:
        dominated = any(q.precision >= p.precision and q.recall >= p.recall
                        and (q.precision > p.precision or q.recall > p.recall) for q in points)
        if not dominated:
            out.append(p)
    return out


def pr_curve(recordings: Sequence[ScoredRecording], thresholds=None, mode: str = "duration",
             params: AggregationParams = AggregationParams()) -> PrCurve:
    """Sweep the decision threshold over smoothed scores.

    Each point averages per-subject precision and recall. Subjects with no
    predicted positives at a threshold are left out of that point's
    precision mean; thresholds where no subject predicts anything are
    dropped from the curve.
    """
    if thresholds is None:
        thresholds = default_thresholds(recordings)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if len(thresholds) < 2:
        raise ValidationError("a PR sweep needs at least 2 thresholds")
    points = []
    for theta in np.sort(thresholds):
        per_subject = subject_confusions(recordings, float(theta), mode, params)
        prec, rec = [], []
        for c in per_subject.values():
            m = precision_recall_f1(c)
            if "precision" not in m.undefined:
                prec.append(m.precision)
            if "recall" not in m.undefined:
                rec.append(m.recall)
        if prec and rec:
            points.append(PrPoint(float(theta), float(np.mean(prec)), float(np.mean(rec))))
    return PrCurve(mode=mode, points=points, auc=pr_auc(pareto_front(points)),
                   auc_all_points=pr_auc(points))
