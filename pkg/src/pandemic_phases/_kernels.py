"""Compiled fixed-step integrators.

Arrays are laid out member-major: parameters (B, 9), states (B, 7), samples
(B, days + 1, 7).  Each member is integrated independently; a failing member
gets a status code and NaN samples while the rest of the batch proceeds.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MIDPOINT, LEAPFROG, RK4 = 0, 1, 2

OK, NONFINITE, NO_CONVERGENCE = 0, 1, 2

_MAX_ITER = 60


@njit(cache=True)
def _f(p, x, n, out):
    beta, c1, c2, sigma, m21, n21, d, r, alpha = p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8]
    s1, s2, e1, e2, i = x[0], x[1], x[2], x[3], x[4]
    force = beta * (c1 * (alpha * e1 + e2) + c2 * alpha * i) / n
    inf1 = alpha * force * s1
    inf2 = force * s2
    mig_s = m21 * s2
    mig_e = n21 * e2
    deaths = d * i
    recoveries = r * i
    out[0] = -inf1 + mig_s
    out[1] = -inf2 - mig_s
    out[2] = inf1 + mig_e - sigma * e1
    out[3] = inf2 - mig_e - sigma * e2
    out[4] = sigma * (e1 + e2) - deaths - recoveries
    out[5] = deaths
    out[6] = recoveries


@njit(cache=True)
def integrate(P, X0, days, substeps, scheme, h, clamp, lag, use_lag, rtol):
    B = X0.shape[0]
    out = np.full((B, days + 1, 7), np.nan)
    status = np.zeros(B, dtype=np.int64)
    fail_day = np.full(B, -1, dtype=np.int64)
    clamped = np.zeros(B, dtype=np.bool_)
    last_prev = np.full((B, 7), np.nan)

    x = np.empty(7)
    prev = np.empty(7)
    nxt = np.empty(7)
    tmp = np.empty(7)
    k1 = np.empty(7)
    k2 = np.empty(7)
    k3 = np.empty(7)
    k4 = np.empty(7)

    for b in range(B):
        p = P[b]
        n = 0.0
        for j in range(7):
            x[j] = X0[b, j]
            n += x[j]
            out[b, 0, j] = x[j]
        atol = rtol * abs(n)
        started = False
        failed = False
        for day in range(1, days + 1):
            for s in range(substeps):
                if scheme == MIDPOINT:
                    # explicit midpoint predictor
                    _f(p, x, n, k1)
                    for j in range(7):
                        tmp[j] = x[j] + 0.5 * h * k1[j]
                    _f(p, tmp, n, k2)
                    for j in range(7):
                        nxt[j] = x[j] + h * k2[j]
                    # fixed-point iteration on y = x + h f((x + y) / 2)
                    last_diff = np.inf
                    converged = False
                    for it in range(_MAX_ITER):
                        for j in range(7):
                            tmp[j] = 0.5 * (x[j] + nxt[j])
                        _f(p, tmp, n, k1)
                        diff = 0.0
                        finite = True
                        for j in range(7):
                            y = x[j] + h * k1[j]
                            if not np.isfinite(y):
                                finite = False
                            dj = abs(y - nxt[j])
                            if dj > diff:
                                diff = dj
                            nxt[j] = y
                        if not finite:
                            break
                        if diff <= atol:
                            converged = True
                            break
                        # stalled at the rounding floor
                        if diff >= last_diff and diff <= 1e-12 * abs(n):
                            converged = True
                            break
                        last_diff = diff
                    if not converged and finite:
                        status[b] = NO_CONVERGENCE
                        fail_day[b] = day
                        failed = True
                        break
                elif scheme == RK4:
                    _f(p, x, n, k1)
                    for j in range(7):
                        tmp[j] = x[j] + 0.5 * h * k1[j]
                    _f(p, tmp, n, k2)
                    for j in range(7):
                        tmp[j] = x[j] + 0.5 * h * k2[j]
                    _f(p, tmp, n, k3)
                    for j in range(7):
                        tmp[j] = x[j] + h * k3[j]
                    _f(p, tmp, n, k4)
                    for j in range(7):
                        nxt[j] = x[j] + (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
                else:
                    if not started:
                        if use_lag:
                            for j in range(7):
                                nxt[j] = lag[b, j]
                        else:
                            # second-order half-step bootstrap
                            _f(p, x, n, k1)
                            for j in range(7):
                                tmp[j] = x[j] + 0.5 * h * k1[j]
                            _f(p, tmp, n, k2)
                            for j in range(7):
                                nxt[j] = x[j] + h * k2[j]
                    else:
                        _f(p, x, n, k1)
                        for j in range(7):
                            nxt[j] = prev[j] + 2.0 * h * k1[j]
                started = True
                if clamp:
                    for j in range(7):
                        if nxt[j] < 0.0:
                            nxt[j] = 0.0
                            clamped[b] = True
                for j in range(7):
                    prev[j] = x[j]
                    x[j] = nxt[j]
            if failed:
                break
            finite = True
            for j in range(7):
                if not np.isfinite(x[j]):
                    finite = False
            if not finite:
                status[b] = NONFINITE
                fail_day[b] = day
                break
            for j in range(7):
                out[b, day, j] = x[j]
        if status[b] == OK:
            for j in range(7):
                last_prev[b, j] = prev[j]
    return out, status, fail_day, clamped, last_prev
