import numpy as np
import pytest

from chewdetect.errors import ConvergenceError, DimensionError, ValidationError
from chewdetect.features import FeatureMatrix, FeatureVector
from chewdetect.fusion import fuse_early, fuse_early_matrix, fuse_late_max, fuse_late_stacked
from chewdetect.oracles import oracle_kkt_check
from chewdetect.svm import (SvmModel, balanced_subsample, decision_score, rbf_kernel, train_svm)
from chewdetect.tuning import expected_improvement, tune_hyperparams


def blobs(rng, n=40, sep=3.0, d=2):
    X = np.vstack([rng.normal(-sep / 2, 0.5, (n, d)), rng.normal(sep / 2, 0.5, (n, d))])
    y = np.r_[np.zeros(n), np.ones(n)].astype(int)
    return X, y


def overlapping(rng, n=100):
    X = np.vstack([rng.normal(-0.5, 1.0, (n, 3)), rng.normal(0.5, 1.0, (n, 3))])
    return X, np.r_[np.zeros(n), np.ones(n)].astype(int)


def test_rbf_kernel():
    assert rbf_kernel([0, 0], [0, 0], 0.5) == 1.0
    assert rbf_kernel([0, 0], [1, 1], 0.5) == pytest.approx(np.exp(-1.0))
    with pytest.raises(DimensionError):
        rbf_kernel([0, 0], [0, 0, 0], 1.0)


def test_kkt_on_overlapping_classes(rng):
    X, y = overlapping(rng)
    model = train_svm(X, 2.0, 0.3, labels=y)
    report = oracle_kkt_check(model, X, 1e-3, labels=y)
    assert report.ok, str(report)
    # soft margin: some multipliers at the box bound
    assert np.any(np.isclose(np.abs(model.alphas_signed), 2.0))


def test_save_load_roundtrip(tmp_path, rng):
    X, y = blobs(rng)
    model = train_svm(X, 1.0, 0.5, labels=y)
    model.save(tmp_path / "m.json")
    back = SvmModel.load(tmp_path / "m.json")
    probe = rng.normal(size=(20, 2))
    np.testing.assert_array_equal(back.decision_function(probe), model.decision_function(probe))
    assert decision_score(model, probe[0]) == pytest.approx(model.decision_function(probe[:1])[0])


def test_load_errors(tmp_path):
    with pytest.raises(ValidationError, match="not found"):
        SvmModel.load(tmp_path / "nope.json")
    (tmp_path / "bad.json").write_text('{"version": "other"}')
    with pytest.raises(ValidationError):
        SvmModel.load(tmp_path / "bad.json")


def test_dimension_mismatch(rng):
    X, y = blobs(rng)
    model = train_svm(X, 1.0, 0.5, labels=y)
    with pytest.raises(DimensionError):
        model.decision_function(np.zeros((3, 5)))


def test_training_preconditions(rng):
    X, y = blobs(rng)
    with pytest.raises(ValidationError, match="both classes"):
        train_svm(X, 1.0, 1.0, labels=np.ones(len(y), dtype=int))
    with pytest.raises(ValidationError):
        train_svm(X, -1.0, 1.0, labels=y)
    Xn = X.copy()
    Xn[0, 0] = np.nan
    with pytest.raises(ValidationError):
        train_svm(Xn, 1.0, 1.0, labels=y)


def test_iteration_cap_raises(rng):
    X, y = overlapping(rng)
    with pytest.raises(ConvergenceError):
        train_svm(X, 100.0, 1.0, labels=y, max_iter=3)


def test_balanced_subsample(rng):
    labels = np.r_[np.ones(30), np.zeros(300)].astype(int)
    m = FeatureMatrix(rng.normal(size=(330, 2)), ("a", "b"), np.arange(330) * 0.05, labels)
    sub = balanced_subsample(m, 20, seed=3)
    assert np.bincount(sub.labels).tolist() == [20, 20]
    assert np.all(np.diff(sub.window_start_s) > 0)
    again = balanced_subsample(m, 20, seed=3)
    np.testing.assert_array_equal(sub.values, again.values)
    clamped = balanced_subsample(m, 50, seed=3)
    assert np.bincount(clamped.labels).tolist() == [50, 30]


def test_tuning_finds_good_params(rng):
    X, y = blobs(rng, n=60, sep=2.0)
    m = FeatureMatrix(X, ("a", "b"), np.arange(len(y)) * 0.05, y)
    res = tune_hyperparams(m, folds=3, budget=14, seed=1)
    assert len(res.history) == 14
    assert res.best_score > 0.9
    assert -5 <= np.log2(res.C) <= 15 and -15 <= np.log2(res.gamma) <= 3
    again = tune_hyperparams(m, folds=3, budget=14, seed=1)
    assert (again.C, again.gamma) == (res.C, res.gamma)


def test_tuning_grid_and_errors(rng):
    X, y = blobs(rng, n=20)
    m = FeatureMatrix(X, ("a", "b"), np.arange(len(y)) * 0.05, y)
    res = tune_hyperparams(m, folds=2, strategy="grid")
    assert len(res.history) == 49
    with pytest.raises(ValidationError):
        tune_hyperparams(m, budget=5)
    with pytest.raises(ValidationError):
        tune_hyperparams(m, strategy="random")


def test_expected_improvement_properties():
    mu = np.array([0.5, 0.5, 0.9])
    sd = np.array([0.1, 0.3, 0.1])
    ei = expected_improvement(mu, sd, best=0.8)
    assert ei[1] > ei[0]        # more uncertainty, more improvement
    assert ei[2] > ei[0]
    assert np.all(ei >= 0)


def test_fuse_early():
    a = FeatureVector(np.array([1.0, 2.0]), ("x", "y"), 0.1)
    b = FeatureVector(np.array([3.0, 4.0]), ("x", "y"), 0.1)
    f = fuse_early(a, b)
    assert f.values.tolist() == [1, 2, 3, 4]
    assert f.names == ("L_x", "L_y", "R_x", "R_y")
    with pytest.raises(ValidationError):
        fuse_early(a, FeatureVector(b.values, b.names, 0.5))


def test_fuse_early_matrix():
    t = np.arange(4) * 0.05
    L = FeatureMatrix(np.ones((4, 2)), ("x", "y"), t, np.array([0, 1, 0, 1]))
    R = FeatureMatrix(np.zeros((4, 2)), ("x", "y"), t)
    f = fuse_early_matrix(L, R)
    assert f.values.shape == (4, 4) and f.labels.tolist() == [0, 1, 0, 1]
    with pytest.raises(ValidationError):
        fuse_early_matrix(L, FeatureMatrix(np.zeros((4, 2)), ("x", "y"), t + 1))


def test_fuse_late_max():
    assert fuse_late_max(-0.3, 0.7) == 0.7
    assert fuse_late_max(np.array([1.0, -2.0]), np.array([0.0, -1.0])).tolist() == [1.0, -1.0]


def test_fuse_late_stacked(rng):
    s = np.vstack([rng.normal(-1, 0.3, (30, 2)), rng.normal(1, 0.3, (30, 2))])
    y = np.r_[np.zeros(30), np.ones(30)].astype(int)
    meta = fuse_late_stacked(s, y)
    assert meta.decision_function(np.array([[2.0, 2.0]]))[0] > 0
    assert meta.decision_function(np.array([[-2.0, -2.0]]))[0] < 0
    with pytest.raises(DimensionError):
        fuse_late_stacked(np.zeros((4, 3)), [0, 1, 0, 1])
