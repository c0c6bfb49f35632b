"""Compiled inner loops: single-pass time-domain window statistics and the
SMO dual solver. Pure-numpy references live in features.py / oracles.py."""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def time_domain_stats(frames, ac_order):
    """Per row: log-energy, zcr, skewness, excess kurtosis, Katz FD, and the
    biased autocorrelation r(0..ac_order-1).

    Output columns: [log_energy, zcr, skew, kurt, katz, r0, ..., r_{p-1}].
    """
    m, n = frames.shape
    out = np.zeros((m, 5 + ac_order))
    nsteps = n - 1
    logn = math.log10(nsteps) if nsteps > 1 else 0.0
    for row in range(m):
        x = frames[row]
        s = 0.0
        sq = 0.0
        for i in range(n):
            s += x[i]
            sq += x[i] * x[i]
        mean = s / n
        m2 = 0.0
        m3 = 0.0
        m4 = 0.0
        for i in range(n):
            d = x[i] - mean
            d2 = d * d
            m2 += d2
            m3 += d2 * d
            m4 += d2 * d2
        m2 /= n
        m3 /= n
        m4 /= n
        out[row, 0] = math.log10(sq / n + 1e-12)
        cross = 0
        L = 0.0
        dmax = 0.0
        x0 = x[0]
        for i in range(n):
            e = x[i] - x0
            dist = math.sqrt(i * i + e * e)
            if dist > dmax:
                dmax = dist
            if i > 0:
                dx = x[i] - x[i - 1]
                L += math.sqrt(1.0 + dx * dx)
                if (x[i] >= 0) != (x[i - 1] >= 0):
                    cross += 1
        out[row, 1] = cross / (n - 1)
        if m2 > 0:
            out[row, 2] = m3 / m2 ** 1.5
            out[row, 3] = m4 / (m2 * m2) - 3.0
        if nsteps > 1:
            fd = logn / (logn + math.log10(dmax / L))
            out[row, 4] = fd if fd > 1.0 else 1.0
        else:
            out[row, 4] = 1.0
        for k in range(ac_order):
            acc = 0.0
            for t in range(n - k):
                acc += x[t] * x[t + k]
            out[row, 5 + k] = acc / n
    return out


@njit(cache=True)
def smo_solve(K, y, C, eps, max_iter):
    """Dual soft-margin SVM by SMO with maximal-violating-pair selection.

    Minimizes 0.5 a'Qa - e'a, Q_ij = y_i y_j K_ij, s.t. y'a = 0, 0 <= a <= C.
    Returns (alpha, rho, iterations, gap); the decision function is
    sum_i alpha_i y_i K(x_i, x) - rho. ``gap`` is the final m - M KKT gap.
    """
    n = y.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    gap = np.inf
    while it < max_iter:
        gmax = -np.inf
        gmin = np.inf
        i = -1
        j = -1
        for t in range(n):
            yt = y[t]
            v = -yt * G[t]
            if (yt > 0 and alpha[t] < C) or (yt < 0 and alpha[t] > 0):
                if v > gmax:
                    gmax = v
                    i = t
            if (yt < 0 and alpha[t] < C) or (yt > 0 and alpha[t] > 0):
                if v < gmin:
                    gmin = v
                    j = t
        gap = gmax - gmin
        if i < 0 or j < 0 or gap < eps:
            break
        it += 1
        old_ai = alpha[i]
        old_aj = alpha[j]
        Kii = K[i, i]
        Kjj = K[j, j]
        Kij = K[i, j]
        if y[i] != y[j]:
            quad = Kii + Kjj + 2.0 * (y[i] * y[j] * Kij)
            if quad <= 0:
                quad = 1e-12
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = Kii + Kjj - 2.0 * (y[i] * y[j] * Kij)
            if quad <= 0:
                quad = 1e-12
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        dai = alpha[i] - old_ai
        daj = alpha[j] - old_aj
        yi = y[i]
        yj = y[j]
        for t in range(n):
            G[t] += y[t] * (yi * K[t, i] * dai + yj * K[t, j] * daj)

    # bias from free vectors, else midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    nfree = 0
    sfree = 0.0
    for t in range(n):
        yg = y[t] * G[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nfree += 1
            sfree += yg
    if nfree > 0:
        rho = sfree / nfree
    else:
        rho = (ub + lb) / 2.0
    return alpha, rho, it, gap
