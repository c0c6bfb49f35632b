"""Cross-validated (C, gamma) search: GP/expected-improvement or a coarse grid."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm
from sklearn.exceptions import ConvergenceWarning
from sklearn.gaussian_process import GaussianProcessRegressor
from sklearn.gaussian_process.kernels import ConstantKernel, Matern, WhiteKernel
from sklearn.model_selection import StratifiedKFold

from .errors import ConvergenceError, ValidationError
from .features import FeatureMatrix
from .svm import DEFAULT_TOL, train_svm

log = logging.getLogger(__name__)

LOG2_C_BOUNDS = (-5.0, 15.0)
LOG2_GAMMA_BOUNDS = (-15.0, 3.0)
N_INITIAL = 10


@dataclass
class TuningResult:
    C: float
    gamma: float
    best_score: float
    history: list[tuple[float, float, float]] = field(default_factory=list)  # (log2C, log2gamma, f1)


def _to_unit(p):
    return np.array([(p[0] - LOG2_C_BOUNDS[0]) / (LOG2_C_BOUNDS[1] - LOG2_C_BOUNDS[0]),
                     (p[1] - LOG2_GAMMA_BOUNDS[0]) / (LOG2_GAMMA_BOUNDS[1] - LOG2_GAMMA_BOUNDS[0])])


def _from_unit(u):
    return (LOG2_C_BOUNDS[0] + u[0] * (LOG2_C_BOUNDS[1] - LOG2_C_BOUNDS[0]),
            LOG2_GAMMA_BOUNDS[0] + u[1] * (LOG2_GAMMA_BOUNDS[1] - LOG2_GAMMA_BOUNDS[0]))


def _f1(pred, truth) -> float:
    tp = np.sum(pred & truth)
    fp = np.sum(pred & ~truth)
    fn = np.sum(~pred & truth)
    return 0.0 if tp == 0 else 2.0 * tp / (2.0 * tp + fp + fn)


def cv_f1(X, y, C: float, gamma: float, splits, tol: float = DEFAULT_TOL) -> float:
    """Mean validation F1 over the given folds; a non-converging fit scores 0."""
    scores = []
    for tr, va in splits:
        try:
            model = train_svm(X[tr], C, gamma, tol=tol, labels=y[tr])
        except ConvergenceError as exc:
            log.info("tuning candidate skipped: %s", exc)
            scores.append(0.0)
            continue
        pred = model.decision_function(X[va]) > 0
        scores.append(_f1(pred, y[va] == 1))
    return float(np.mean(scores))


def expected_improvement(mu, sigma, best, xi: float = 0.01):
    sigma = np.maximum(sigma, 1e-12)
    imp = mu - best - xi
    z = imp / sigma
    return imp * norm.cdf(z) + sigma * norm.pdf(z)


def _propose(gp, best, evaluated, rng, n_random=2000, n_starts=5):
    cand = rng.random((n_random, 2))
    mu, sd = gp.predict(cand, return_std=True)
    ei = expected_improvement(mu, sd, best)
    starts = cand[np.argsort(-ei, kind="stable")[:n_starts]]

    def neg_ei(u):
        m, s = gp.predict(u[None, :], return_std=True)
        return -float(expected_improvement(m, s, best)[0])

    results = []
    for s0 in starts:
        res = minimize(neg_ei, s0, method="L-BFGS-B", bounds=[(0.0, 1.0), (0.0, 1.0)])
        results.append((float(res.fun), tuple(np.clip(res.x, 0.0, 1.0))))
    results.sort(key=lambda r: r[0])
    for _, u in results + [(0.0, tuple(c)) for c in cand[np.argsort(-ei, kind="stable")]]:
        u = np.asarray(u)
        if not evaluated or np.min(np.linalg.norm(np.asarray(evaluated) - u, axis=1)) > 1e-4:
            return u
    return rng.random(2)


def tune_hyperparams(matrix: FeatureMatrix, folds: int = 5, budget: int = 30, seed: int = 0,
                     strategy: str = "bayes", tol: float = DEFAULT_TOL) -> TuningResult:
    """Maximize mean stratified-CV F1 over log2 C in [-5, 15], log2 gamma in [-15, 3].

    ``strategy="bayes"``: 10 seeded random points, then GP (Matern-5/2)
    expected-improvement proposals until ``budget`` evaluations.
    ``strategy="grid"``: the 7x7 grid over the same box (``budget`` ignored).
    """
    if folds < 2:
        raise ValidationError("need at least 2 CV folds")
    if strategy not in ("bayes", "grid"):
        raise ValidationError(f"unknown tuning strategy {strategy!r}")
    if strategy == "bayes" and budget < N_INITIAL:
        raise ValidationError(f"tuning budget must be >= {N_INITIAL}")
    if matrix.labels is None:
        raise ValidationError("tuning needs labelled data")
    X, y = matrix.values, matrix.labels.astype(np.int64)
    counts = np.bincount(y, minlength=2)
    if counts.min() < folds:
        raise ValidationError(f"each class needs at least {folds} rows for {folds}-fold CV")
    splits = list(StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed).split(X, y))

    history: list[tuple[float, float, float]] = []

    def evaluate(lc, lg):
        f = cv_f1(X, y, 2.0 ** lc, 2.0 ** lg, splits, tol)
        history.append((float(lc), float(lg), f))
        log.debug("log2C=%.2f log2gamma=%.2f cv_f1=%.4f", lc, lg, f)
        return f

    if strategy == "grid":
        for lc in np.linspace(*LOG2_C_BOUNDS, 7):
            for lg in np.linspace(*LOG2_GAMMA_BOUNDS, 7):
                evaluate(lc, lg)
    else:
        rng = np.random.default_rng(seed)
        units = [u for u in rng.random((N_INITIAL, 2))]
        for u in units:
            evaluate(*_from_unit(u))
        kernel = (ConstantKernel(1.0, constant_value_bounds="fixed")
                  * Matern(length_scale=[0.3, 0.3], length_scale_bounds=(1e-2, 10.0), nu=2.5)
                  + WhiteKernel(1e-3, noise_level_bounds=(1e-6, 1e-1)))
        while len(history) < budget:
            gp = GaussianProcessRegressor(kernel=kernel, normalize_y=True, random_state=seed,
                                          n_restarts_optimizer=2)
            Y = np.array([h[2] for h in history])
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                gp.fit(np.array(units), Y)
            u = _propose(gp, Y.max(), units, rng)
            units.append(u)
            evaluate(*_from_unit(u))

    scores = np.array([h[2] for h in history])
    k = int(np.argmax(scores))
    lc, lg, f = history[k]
    return TuningResult(C=2.0 ** lc, gamma=2.0 ** lg, best_score=f, history=history)
