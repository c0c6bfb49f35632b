"""Score smoothing, thresholding and chew -> bout -> meal aggregation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

GRANULARITIES = ("chew", "bout", "meal")


@dataclass(frozen=True)
class ScoreSeries:
    window_start_s: np.ndarray
    scores: np.ndarray
    step_s: float

    def __post_init__(self):
        t = np.asarray(self.window_start_s, dtype=np.float64)
        s = np.asarray(self.scores, dtype=np.float64)
        if t.shape != s.shape or t.ndim != 1:
            raise ValidationError("timestamps and scores must be 1-D and equally long")
        if len(t) > 1:
            dt = np.diff(t)
            if np.any(dt <= 0) or np.max(np.abs(dt - self.step_s)) > 1e-6:
                raise ValidationError("window timestamps must increase by a constant step")
        object.__setattr__(self, "window_start_s", t)
        object.__setattr__(self, "scores", s)

    def __len__(self) -> int:
        return len(self.scores)


@dataclass(frozen=True)
class EventList:
    granularity: str
    intervals: np.ndarray  # (k, 2) start/stop seconds

    def __post_init__(self):
        if self.granularity not in GRANULARITIES:
            raise ValidationError(f"unknown granularity {self.granularity!r}")
        iv = np.asarray(self.intervals, dtype=np.float64).reshape(-1, 2)
        if len(iv):
            if np.any(iv[:, 1] <= iv[:, 0]):
                raise ValidationError("event with stop <= start")
            if np.any(iv[1:, 0] < iv[:-1, 1]):
                raise ValidationError("events overlap or are unsorted")
        iv.setflags(write=False)
        object.__setattr__(self, "intervals", iv)

    def __len__(self) -> int:
        return len(self.intervals)

    @property
    def total_duration(self) -> float:
        return float(np.sum(self.intervals[:, 1] - self.intervals[:, 0]))

    def rows(self):
        return [(float(a), float(b), self.granularity) for a, b in self.intervals]


@dataclass(frozen=True)
class AggregationParams:
    """Heuristic rule thresholds (seconds, except the chew count)."""
    min_chew_s: float = 0.1
    max_chew_s: float = 1.0
    bout_gap_s: float = 2.0
    min_chews_per_bout: int = 3
    meal_gap_s: float = 60.0
    min_meal_s: float = 30.0

    def __post_init__(self):
        vals = (self.min_chew_s, self.max_chew_s, self.bout_gap_s, self.min_chews_per_bout,
                self.meal_gap_s, self.min_meal_s)
        if any(v <= 0 for v in vals):
            raise ValidationError("aggregation parameters must be positive")
        if not self.min_chew_s < self.max_chew_s:
            raise ValidationError("min_chew_s must be smaller than max_chew_s")


def smooth_scores(series: ScoreSeries, length: int) -> ScoreSeries:
    """Centered moving average; near the edges the average uses fewer points."""
    if length < 1 or length % 2 == 0:
        raise ValidationError(f"smoothing length must be odd and >= 1, got {length}")
    if length == 1 or len(series) == 0:
        return series
    kernel = np.ones(length)
    sums = np.convolve(series.scores, kernel, mode="same")
    counts = np.convolve(np.ones(len(series)), kernel, mode="same")
    return ScoreSeries(series.window_start_s, sums / counts, series.step_s)


def threshold_labels(scores, theta: float = 0.0) -> np.ndarray:
    """1 where score > theta (strict), else 0."""
    s = scores.scores if isinstance(scores, ScoreSeries) else np.asarray(scores, dtype=np.float64)
    return (s > theta).astype(np.int8)


def _runs(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Start and (inclusive) end indices of maximal runs of ones."""
    b = np.concatenate([[0], np.asarray(labels, dtype=np.int8) != 0, [0]]).astype(np.int8)
    d = np.diff(b)
    return np.flatnonzero(d == 1), np.flatnonzero(d == -1) - 1


def labels_to_chews(labels, step_s: float, size_s: float,
                    params: AggregationParams = AggregationParams(),
                    t0: float = 0.0, duration_s: float | None = None) -> EventList:
    """Each maximal run of positive windows becomes its own pulse
    [run_start, run_end + size_s], ``run_end`` being the start time of the
    first window after the run, so k windows give k * step_s + size_s.
    Pulses are cut at ``duration_s`` when given, pulses outside
    [min_chew_s, max_chew_s] are dropped, and a kept pulse that runs into
    the next one is cut at that pulse's start."""
    starts, ends = _runs(labels)
    if len(starts) == 0:
        return EventList("chew", np.empty((0, 2)))
    iv = np.column_stack([t0 + starts * step_s, t0 + (ends + 1) * step_s + size_s])
    if duration_s is not None:
        iv[:, 1] = np.minimum(iv[:, 1], duration_s)
        iv = iv[iv[:, 1] > iv[:, 0]]
    dur = iv[:, 1] - iv[:, 0]
    keep = (dur >= params.min_chew_s - 1e-9) & (dur <= params.max_chew_s + 1e-9)
    iv = iv[keep]
    iv[:-1, 1] = np.minimum(iv[:-1, 1], iv[1:, 0])
    return EventList("chew", iv)


def _merge_by_gap(iv: np.ndarray, max_gap: float) -> tuple[np.ndarray, np.ndarray]:
    """Merge consecutive intervals whose gap is < max_gap.

    Returns merged intervals and the number of inputs per merged interval.
    """
    if len(iv) == 0:
        return np.empty((0, 2)), np.empty(0, dtype=int)
    gaps = iv[1:, 0] - iv[:-1, 1]
    new = np.concatenate([[True], gaps >= max_gap])
    first = np.flatnonzero(new)
    last = np.concatenate([first[1:] - 1, [len(iv) - 1]])
    return np.column_stack([iv[first, 0], iv[last, 1]]), last - first + 1


def chews_to_bouts(chews: EventList, params: AggregationParams = AggregationParams()) -> EventList:
    merged, counts = _merge_by_gap(chews.intervals, params.bout_gap_s)
    return EventList("bout", merged[counts >= params.min_chews_per_bout])


def bouts_to_meals(bouts: EventList, params: AggregationParams = AggregationParams()) -> EventList:
    merged, _ = _merge_by_gap(bouts.intervals, params.meal_gap_s)
    if len(merged):
        merged = merged[(merged[:, 1] - merged[:, 0]) >= params.min_meal_s - 1e-9]
    return EventList("meal", merged)


def chews_to_meals(chews: EventList, params: AggregationParams = AggregationParams()) -> EventList:
    return bouts_to_meals(chews_to_bouts(chews, params), params)


def detect_events(series: ScoreSeries, size_s: float, theta: float = 0.0,
                  params: AggregationParams = AggregationParams(),
                  duration_s: float | None = None) -> dict[str, EventList]:
    """Threshold an (already smoothed) score series and aggregate it."""
    labels = threshold_labels(series, theta)
    t0 = float(series.window_start_s[0]) if len(series) else 0.0
    chews = labels_to_chews(labels, series.step_s, size_s, params, t0=t0, duration_s=duration_s)
    bouts = chews_to_bouts(chews, params)
    return {"chew": chews, "bout": bouts, "meal": bouts_to_meals(bouts, params)}
