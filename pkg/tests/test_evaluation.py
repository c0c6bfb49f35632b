import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chewdetect.errors import ValidationError
from chewdetect.evaluation import (ConfusionCounts, PrPoint, ScoredRecording, duration_confusion,
                                   f1_from_pr, pareto_front, pr_auc, pr_curve, precision_recall_f1,
                                   subject_confusions, summarize, window_confusion,
                                   window_truth_labels)
from chewdetect.oracles import oracle_duration_confusion
from chewdetect.postprocess import EventList, ScoreSeries


def test_window_confusion_examples():
    c = window_confusion([1, 1, 0, 0], [1, 0, 1, 0])
    assert c.as_dict() == {"tp": 1, "fp": 1, "fn": 1, "tn": 1}
    t = np.array([1, 0, 1, 1, 0])
    assert window_confusion(t, t).fp == window_confusion(t, t).fn == 0
    flip = window_confusion(1 - t, t)
    assert flip.tp == flip.tn == 0
    with pytest.raises(ValidationError):
        window_confusion([1, 0], [1])


def test_prf_zero_division_flags():
    m = precision_recall_f1(ConfusionCounts(0, 0, 0, 5))
    assert tuple(m) == (0.0, 0.0, 0.0)
    assert set(m.undefined) == {"precision", "recall", "f1"}


def test_f1_ordering_property():
    for p, r in [(0.9, 0.1), (0.5, 0.5), (1.0, 0.0), (0.3, 0.8)]:
        f = f1_from_pr(p, r)
        assert 0 <= f <= (p + r) / 2 + 1e-12


def test_duration_example():
    c = duration_confusion([[12, 22]], [[10, 20]], 30)
    assert (c.tp, c.fp, c.fn, c.tn) == (8, 2, 2, 18)
    m = precision_recall_f1(c)
    assert m.precision == pytest.approx(0.8) and m.recall == pytest.approx(0.8)
    assert oracle_duration_confusion([[12, 22]], [[10, 20]], 30).as_dict() == pytest.approx(c.as_dict())


def test_duration_trivial_cases():
    truth = [[1.0, 4.0], [6.0, 7.5]]
    same = duration_confusion(truth, truth, 10)
    assert same.fp == same.fn == 0
    empty = duration_confusion(np.empty((0, 2)), truth, 10)
    assert empty.tp == empty.fp == 0 and empty.fn == pytest.approx(4.5)
    with pytest.raises(ValidationError):
        duration_confusion([[5, 12]], truth, 10)


def test_duration_accepts_event_lists():
    p = EventList("meal", np.array([[0.0, 2.0]]))
    t = EventList("meal", np.array([[1.0, 3.0]]))
    assert duration_confusion(p, t, 4).tp == 1.0


def test_truth_labels_half_overlap():
    starts = np.arange(6) * 0.05
    chews = np.array([[0.1, 0.3]])
    # windows [0,.2] overlap .1 (50%), [.05,.25] .15, ..., [.25,.45] .05
    assert window_truth_labels(starts, 0.2, chews).tolist() == [1, 1, 1, 1, 1, 0]
    assert window_truth_labels(starts, 0.2, chews, min_overlap=0.9).tolist() == [0, 0, 1, 0, 0, 0]
    assert window_truth_labels(starts, 0.2, np.empty((0, 2))).sum() == 0


def test_summarize_format():
    s = summarize([0.6, 0.7, 0.65])
    assert s["mean"] == pytest.approx(0.65)
    assert s["std"] == pytest.approx(0.05)
    assert s["text"] == "0.650 ± 0.050"
    assert summarize([0.5])["std"] == 0.0


def test_pr_auc_convention():
    assert pr_auc([PrPoint(0, 1.0, 1.0)]) == 1.0
    pts = [PrPoint(0, 1.0, 0.5), PrPoint(1, 0.5, 1.0)]
    # flat to recall 0 at precision 1, then trapezoid 0.5 -> 1.0
    assert pr_auc(pts) == pytest.approx(0.5 + 0.375)
    assert pr_auc([]) == 0.0


def test_pareto_front():
    pts = [PrPoint(0, 1.0, 0.5), PrPoint(1, 0.4, 0.4), PrPoint(2, 0.5, 1.0), PrPoint(3, 0.5, 1.0)]
    front = pareto_front(pts)
    assert PrPoint(1, 0.4, 0.4) not in front
    assert len(front) == 3


def _scored(sid, scores, truth, size=0.2, step=0.05):
    t = np.arange(len(scores)) * step
    s = ScoreSeries(t, np.asarray(scores, dtype=float), step)
    return ScoredRecording(sid, sid + "_r", s, s, np.asarray(truth), EventList("meal", np.empty((0, 2))),
                           duration_s=len(scores) * step + size, size_s=size)


def test_pr_curve_window_perfect_and_random():
    rng = np.random.default_rng(0)
    truth = rng.permutation(np.repeat([0, 1], 2000))
    # balanced classes put the median threshold inside the score gap
    perfect = [_scored("a", truth * 2.0 - 1.0 + rng.normal(0, 0.1, 4000), truth)]
    assert pr_curve(perfect, mode="window").auc == pytest.approx(1.0)
    noise = [_scored(s, rng.normal(size=4000), rng.random(4000) < 0.5) for s in "abc"]
    curve = pr_curve(noise, mode="window")
    assert curve.auc == pytest.approx(0.5, abs=0.05)
    assert curve.auc_all_points == pytest.approx(0.5, abs=0.05)
    assert all(0 <= p.precision <= 1 and 0 <= p.recall <= 1 for p in curve.points)
    with pytest.raises(ValidationError):
        pr_curve(noise, thresholds=[0.0], mode="window")


def test_subjects_pooled_before_averaging():
    a1 = _scored("a", [1, 1, -1, -1], [1, 0, 0, 0])
    a2 = _scored("a", [1, -1, -1, -1], [1, 1, 0, 0])
    b = _scored("b", [-1, -1, -1, -1], [0, 0, 0, 0])
    per = subject_confusions([a1, a2, b], 0.0, "window", smoothed=False)
    assert list(per) == ["a", "b"]
    assert per["a"].as_dict() == {"tp": 2, "fp": 1, "fn": 1, "tn": 4}


def test_more_detected_truth_never_lowers_recall():
    truth = np.array([0, 1, 1, 1, 0, 0])
    base = window_confusion([0, 1, 0, 0, 0, 0], truth)
    more = window_confusion([0, 1, 1, 0, 0, 0], truth)
    assert precision_recall_f1(more).recall >= precision_recall_f1(base).recall


intervals = st.lists(st.tuples(st.floats(0, 100), st.floats(0.001, 20)), max_size=8)


@given(intervals, intervals, st.floats(1, 130))
@settings(max_examples=150, deadline=None)
def test_duration_matches_oracle(pred, truth, total):
    P = np.array([(a, min(a + d, total)) for a, d in pred if a < total], dtype=float).reshape(-1, 2)
    T = np.array([(a, min(a + d, total)) for a, d in truth if a < total], dtype=float).reshape(-1, 2)
    P, T = P[P[:, 1] > P[:, 0]], T[T[:, 1] > T[:, 0]]
    c = duration_confusion(P, T, total)
    o = oracle_duration_confusion(P, T, total, 1000)
    tol = 2e-3 * (2 * (len(P) + len(T)) + 1)
    for k in ("tp", "fp", "fn", "tn"):
        assert getattr(c, k) == pytest.approx(getattr(o, k), abs=tol)
    assert c.total == pytest.approx(total, abs=1e-6)
