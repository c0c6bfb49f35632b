"""Combining the left and right microphone channels."""
from __future__ import annotations

import numpy as np

from .errors import DimensionError, ValidationError
from .features import FeatureMatrix, FeatureVector
from .signal_io import TIME_EPS
from .svm import DEFAULT_TOL, SvmModel, train_svm

CHANNEL_MODES = ("left", "right", "early", "late-max", "late-stacked")
LEFT, RIGHT = 0, 1


def fuse_early(left: FeatureVector, right: FeatureVector) -> FeatureVector:
    """Concatenate per-channel feature vectors, left block first."""
    if abs(left.window_start_s - right.window_start_s) > TIME_EPS:
        raise ValidationError(
            f"window timestamps differ: {left.window_start_s} vs {right.window_start_s}")
    return FeatureVector(
        values=np.concatenate([left.values, right.values]),
        names=tuple(f"L_{n}" for n in left.names) + tuple(f"R_{n}" for n in right.names),
        window_start_s=left.window_start_s,
    )


def fuse_early_matrix(left: FeatureMatrix, right: FeatureMatrix) -> FeatureMatrix:
    if len(left) != len(right) or np.any(np.abs(left.window_start_s - right.window_start_s) > TIME_EPS):
        raise ValidationError("channel feature matrices are not window-aligned")
    deg = None
    if left.degenerate is not None and right.degenerate is not None:
        deg = left.degenerate & right.degenerate
    return FeatureMatrix(
        values=np.hstack([left.values, right.values]),
        names=tuple(f"L_{n}" for n in left.names) + tuple(f"R_{n}" for n in right.names),
        window_start_s=left.window_start_s, labels=left.labels, subject_id=left.subject_id,
        degenerate=deg)


def fuse_late_max(score_left, score_right):
    """Element-wise max of the two channel scores."""
    out = np.maximum(score_left, score_right)
    return float(out) if np.ndim(out) == 0 else out


def fuse_late_stacked(scores, labels, C: float = 1.0, gamma: float = 1.0,
                      tol: float = DEFAULT_TOL) -> SvmModel:
    """Meta-classifier over per-window (left score, right score) pairs."""
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    if scores.shape[1] != 2:
        raise DimensionError(f"stacked fusion takes 2-D score vectors, got {scores.shape[1]}-D")
    return train_svm(scores, C, gamma, tol=tol, labels=labels)
