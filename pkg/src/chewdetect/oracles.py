"""Slow, independent reference implementations used to check the fast paths.

Nothing here shares code with the functions under test beyond data types.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .evaluation import ConfusionCounts
from .features import COND_CLAMP, FeatureMatrix
from .postprocess import EventList


def _intervals(x) -> np.ndarray:
    if isinstance(x, EventList):
        return x.intervals
    return np.asarray(x, dtype=np.float64).reshape(-1, 2)


def _mask(iv: np.ndarray, n: int, rate: float) -> np.ndarray:
    # sample k (midpoint (k + 0.5) / rate) lies in [a, b) iff a*rate - 0.5 <= k < b*rate - 0.5
    m = np.zeros(n, dtype=bool)
    for a, b in iv:
        lo = max(0, math.ceil(a * rate - 0.5))
        hi = min(n, math.ceil(b * rate - 0.5))
        m[lo:hi] = True
    return m


def oracle_duration_confusion(pred, truth, total_s: float, resolution_hz: float = 1000.0) -> ConfusionCounts:
    """Label every sample midpoint and count, then divide by the rate."""
    if resolution_hz < 100:
        raise ValidationError("resolution must be >= 100 Hz")
    n = int(round(total_s * resolution_hz))
    p = _mask(_intervals(pred), n, resolution_hz)
    g = _mask(_intervals(truth), n, resolution_hz)
    tp, np_, ng = np.count_nonzero(p & g), np.count_nonzero(p), np.count_nonzero(g)
    return ConfusionCounts(tp=tp / resolution_hz, fp=(np_ - tp) / resolution_hz,
                           fn=(ng - tp) / resolution_hz, tn=(n - np_ - ng + tp) / resolution_hz)


def jacobi_eigenvalues(A, tol: float = 1e-14, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations (ascending)."""
    A = np.array(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n) or not np.allclose(A, A.T):
        raise ValidationError("matrix must be square and symmetric")
    scale = max(np.abs(A).max(), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(sum(A[i, j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp, akq = A[k, p], A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = A[p, k], A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
    return np.sort(np.diag(A))


def oracle_condition_number(frame, p: int = 10) -> float:
    """log10(lambda_max / lambda_min) of the dense p x p autocorrelation matrix.

    Built entry by entry from the raw samples; clamps at log10(1e12) the same
    way the production feature does.
    """
    x = [float(v) for v in np.asarray(frame).ravel()]
    n = len(x)
    if n <= p:
        raise ValidationError("frame shorter than the matrix order")
    R = np.empty((p, p))
    for i in range(p):
        for j in range(p):
            k = abs(i - j)
            R[i, j] = sum(x[t] * x[t + k] for t in range(n - k)) / n
    ev = jacobi_eigenvalues(R)
    lmin, lmax = ev[0], ev[-1]
    if not lmax > 0 or not lmin > lmax / COND_CLAMP:
        return math.log10(COND_CLAMP)
    return min(max(math.log10(lmax / lmin), 0.0), math.log10(COND_CLAMP))


@dataclass
class KktReport:
    max_violation: float
    sum_alpha_y: float
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if not self.violations:
            return f"no KKT violations (max margin violation {self.max_violation:.3g})"
        return f"{len(self.violations)} KKT violation(s):\n" + "\n".join(
            "  " + v for v in self.violations)


def oracle_kkt_check(model, matrix, tol: float = 1e-3, labels=None) -> KktReport:
    """Check every dual KKT condition of ``model`` on its training data.

    The dual variables are recovered by matching the stored support vectors
    against the standardized training rows; rows without a match have
    alpha = 0.
    """
    if isinstance(matrix, FeatureMatrix):
        X, y01 = matrix.values, matrix.labels
    else:
        X, y01 = np.atleast_2d(np.asarray(matrix, dtype=np.float64)), labels
    if y01 is None:
        raise ValidationError("training labels required")
    y = np.where(np.asarray(y01) == 1, 1.0, -1.0)
    Z = model.standardizer.transform(X)
    alpha = np.zeros(len(Z))
    rows: dict[bytes, list[int]] = {}
    for i, z in enumerate(Z):
        rows.setdefault(z.tobytes(), []).append(i)
    violations = []
    for sv, coef in zip(model.support_vectors, model.alphas_signed):
        free = rows.get(np.ascontiguousarray(sv).tobytes())
        if not free:
            violations.append("support vector not found among training rows")
            continue
        i = free.pop(0)
        alpha[i] = coef * y[i]

    C = model.C
    # decision values straight from the definition, one row at a time
    f = np.empty(len(Z))
    for i, z in enumerate(Z):
        d = model.support_vectors - z
        f[i] = float(np.sum(model.alphas_signed * np.exp(-model.gamma * np.sum(d * d, axis=1)))) + model.bias

    worst = 0.0
    for i in range(len(Z)):
        a, m = alpha[i], y[i] * f[i]
        if a < -tol:
            violations.append(f"row {i}: alpha {a:.6g} < 0")
        if a > C + tol:
            violations.append(f"row {i}: alpha {a:.6g} exceeds C={C:g}")
        if a == 0.0:
            v = max(0.0, 1.0 - m)          # non-support: margin >= 1
        elif a >= C:
            v = max(0.0, m - 1.0)          # bound: margin <= 1
        else:
            v = abs(m - 1.0)               # free: on the margin
        worst = max(worst, v)
        if v > tol:
            violations.append(f"row {i}: margin y*f = {m:.6g} with alpha = {a:.6g}")
    s = float(np.dot(alpha, y))
    if abs(s) > tol * max(1.0, C):
        violations.append(f"sum(alpha*y) = {s:.6g} != 0")
    return KktReport(max_violation=worst, sum_alpha_y=s, violations=violations)
