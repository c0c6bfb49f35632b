"""Binary RBF-kernel SVM trained by SMO on the dual problem."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import smo_solve
from .errors import ConvergenceError, DimensionError, ValidationError
from .features import FeatureMatrix

log = logging.getLogger(__name__)

MODEL_VERSION = "chewdetect-model-v1"
DEFAULT_TOL = 1e-3


def rbf_kernel(u, v, gamma: float) -> float:
    """exp(-gamma * ||u - v||^2)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionError(f"dimension mismatch: {u.shape} vs {v.shape}")
    if gamma <= 0:
        raise ValidationError("gamma must be positive")
    d = u - v
    return float(np.exp(-gamma * np.dot(d, d)))


def sq_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    aa = np.einsum("ij,ij->i", A, A)
    bb = np.einsum("ij,ij->i", B, B)
    D = aa[:, None] + bb[None, :] - 2.0 * (A @ B.T)
    np.maximum(D, 0.0, out=D)
    return D


def rbf_kernel_matrix(A, B, gamma: float) -> np.ndarray:
    return np.exp(-gamma * sq_distances(np.atleast_2d(A), np.atleast_2d(B)))


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        sd = X.std(axis=0)
        return cls(mean=X.mean(axis=0), std=np.where(sd > 1e-12, sd, 1.0))

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std


@dataclass(frozen=True)
class SvmModel:
    """Trained classifier. Support vectors are stored standardized."""
    support_vectors: np.ndarray
    alphas_signed: np.ndarray
    bias: float
    gamma: float
    C: float
    standardizer: Standardizer

    def __post_init__(self):
        sv = np.atleast_2d(np.asarray(self.support_vectors, dtype=np.float64))
        a = np.asarray(self.alphas_signed, dtype=np.float64).ravel()
        if len(a) == 0 or sv.shape[0] == 0:
            raise ValidationError("an SVM model needs at least one support vector")
        if sv.shape[0] != len(a):
            raise ValidationError("support vector / coefficient count mismatch")
        if self.gamma <= 0 or self.C <= 0:
            raise ValidationError("gamma and C must be positive")
        if sv.shape[1] != len(self.standardizer.mean):
            raise DimensionError("standardizer dimension differs from support vectors")
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "alphas_signed", a)

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    def decision_function(self, X, chunk: int = 8192) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DimensionError(f"model expects {self.n_features} features, got {X.shape[1]}")
        Z = self.standardizer.transform(X)
        out = np.empty(len(Z))
        for lo in range(0, len(Z), chunk):
            K = rbf_kernel_matrix(Z[lo: lo + chunk], self.support_vectors, self.gamma)
            out[lo: lo + chunk] = K @ self.alphas_signed + self.bias
        return out

    def to_dict(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "gamma": float(self.gamma),
            "C": float(self.C),
            "bias": float(self.bias),
            "standardizer_mean": self.standardizer.mean.tolist(),
            "standardizer_std": self.standardizer.std.tolist(),
            "support_vectors": self.support_vectors.tolist(),
            "alphas_signed": self.alphas_signed.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        if d.get("version") != MODEL_VERSION:
            raise ValidationError(f"unsupported model version {d.get('version')!r}")
        return cls(
            support_vectors=np.asarray(d["support_vectors"], dtype=np.float64),
            alphas_signed=np.asarray(d["alphas_signed"], dtype=np.float64),
            bias=float(d["bias"]), gamma=float(d["gamma"]), C=float(d["C"]),
            standardizer=Standardizer(np.asarray(d["standardizer_mean"], dtype=np.float64),
                                      np.asarray(d["standardizer_std"], dtype=np.float64)),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "SvmModel":
        path = Path(path)
        if not path.is_file():
            raise ValidationError(f"{path}: model file not found")
        try:
            return cls.from_dict(json.loads(path.read_text()))
        except (json.JSONDecodeError, KeyError) as exc:
            raise ValidationError(f"{path}: malformed model file ({exc})") from exc


def decision_score(model: SvmModel, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError("decision_score takes a single feature vector")
    return float(model.decision_function(x[None, :])[0])


def _as_xy(matrix, labels=None):
    if isinstance(matrix, FeatureMatrix):
        X, y = matrix.values, matrix.labels
    else:
        X, y = np.atleast_2d(np.asarray(matrix, dtype=np.float64)), labels
    if y is None:
        raise ValidationError("training data needs labels")
    return X, np.asarray(y).astype(np.int64)


def default_max_iter(n: int) -> int:
    return max(200_000, 500 * n)


def train_svm(matrix, C: float, gamma: float, tol: float = DEFAULT_TOL,
              labels=None, max_iter: int | None = None) -> SvmModel:
    """Fit a soft-margin RBF SVM.

    ``matrix`` is a :class:`FeatureMatrix` with 0/1 labels, or a plain array
    together with ``labels``. Features are standardized with training
    statistics stored on the model. Raises :class:`ConvergenceError` when
    the iteration cap is hit before the KKT gap drops below ``tol``.
    """
    X, y01 = _as_xy(matrix, labels)
    if not np.all(np.isfinite(X)):
        raise ValidationError("non-finite feature values")
    if len(X) != len(y01):
        raise ValidationError("labels length differs from number of rows")
    classes = set(np.unique(y01).tolist())
    if not classes <= {0, 1}:
        raise ValidationError(f"labels must be 0/1, got {sorted(classes)}")
    if len(classes) < 2:
        raise ValidationError("training data must contain both classes")
    if C <= 0 or gamma <= 0 or tol <= 0:
        raise ValidationError("C, gamma and tol must be positive")

    std = Standardizer.fit(X)
    Z = std.transform(X)
    y = np.where(y01 == 1, 1.0, -1.0)
    K = rbf_kernel_matrix(Z, Z, gamma)
    cap = default_max_iter(len(y)) if max_iter is None else max_iter
    alpha, rho, iters, gap = smo_solve(K, y, float(C), float(tol), int(cap))
    if not gap < tol:
        raise ConvergenceError(
            f"SMO stopped after {iters} iterations with KKT gap {gap:.3g} >= tol {tol:g} "
            f"(C={C:g}, gamma={gamma:g})")
    sv = alpha > 0
    log.debug("SMO: %d iterations, %d support vectors", iters, int(sv.sum()))
    return SvmModel(support_vectors=Z[sv], alphas_signed=alpha[sv] * y[sv], bias=-rho,
                    gamma=float(gamma), C=float(C), standardizer=std)


def balanced_subsample(matrix: FeatureMatrix, n_per_class: int, seed) -> FeatureMatrix:
    """Draw up to ``n_per_class`` rows of each class without replacement.

    Selected rows keep their original relative order.
    """
    if matrix.labels is None:
        raise ValidationError("balanced_subsample needs labelled data")
    rng = np.random.default_rng(seed)
    chosen = []
    for cls in (1, 0):
        idx = np.flatnonzero(matrix.labels == cls)
        if len(idx) == 0:
            raise ValidationError(f"class {cls} absent; cannot subsample")
        if len(idx) < n_per_class:
            log.warning("only %d windows of class %d available (asked %d); class imbalance",
                        len(idx), cls, n_per_class)
        k = min(n_per_class, len(idx))
        chosen.append(rng.choice(idx, size=k, replace=False))
    return matrix.take(np.sort(np.concatenate(chosen)))
