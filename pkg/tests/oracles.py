"""Independent reference implementations used to check the package.

Nothing here imports the package's numerics: the right-hand side is written
out again term by term and solved with scipy's adaptive Runge-Kutta, and the
CUSUM is a plain loop over lists.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp


def seidr_rhs(t, y, beta, c1, c2, sigma, m21, n21, d, r, alpha, n_total):
    s1, s2, e1, e2, i, dd, rr = y
    lam = beta * (c1 * (alpha * e1 + e2) + c2 * alpha * i) / n_total
    return [
        -alpha * lam * s1 + m21 * s2,
        -lam * s2 - m21 * s2,
        alpha * lam * s1 + n21 * e2 - sigma * e1,
        lam * s2 - (n21 + sigma) * e2,
        sigma * (e1 + e2) - (d + r) * i,
        d * i,
        r * i,
    ]


def solve_reference(theta: dict, x0, days: int) -> np.ndarray:
    """Daily samples (days + 1, 7) from a tight-tolerance adaptive solve."""
    n_total = float(sum(x0))
    args = tuple(theta[k] for k in ("beta", "c1", "c2", "sigma", "m21", "n21", "d", "r", "alpha")) + (n_total,)
    sol = solve_ivp(
        seidr_rhs, (0.0, float(days)), list(map(float, x0)), args=args, method="DOP853",
        t_eval=np.arange(days + 1, dtype=float), rtol=1e-12, atol=1e-9,
    )
    assert sol.success
    return sol.y.T


def linear_decay(i0: float, d: float, r: float, t: float) -> tuple[float, float, float]:
    """Closed form with beta = sigma = 0: I decays, D and R split the outflow d:r."""
    i = i0 * math.exp(-(d + r) * t)
    out = i0 - i
    return i, out * d / (d + r), out * r / (d + r)


def cusum_table(xs, mu0: float, k: float, h: float):
    """Hand recursion: returns (cp path, cm path, 1-based stop index or None, direction)."""
    cp, cm = 0.0, 0.0
    cps, cms = [], []
    for n, x in enumerate(xs, start=1):
        cp = max(0.0, cp + x - (mu0 + k))
        cm = max(0.0, cm - x + (mu0 - k))
        cps.append(cp)
        cms.append(cm)
        if cp >= h or cm >= h:
            return cps, cms, n, ("positive" if cp >= cm else "negative")
    return cps, cms, None, None
