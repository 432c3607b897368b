"""Two-sided CUSUM change detection on death residuals.

Residuals are ``observed - model`` cumulative deaths, so a *positive*
detection means the epidemic is running ahead of the fitted phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .fitting import InitialStateSpec, build_initial_state
from .model import DEATHS, IntegratorConfig, ModelParams, SeidrState, simulate_batch
from .series import ObservedSeries

POSITIVE = "positive"
NEGATIVE = "negative"

# threshold is c_factor * H_SIGMAS * sigma0
H_SIGMAS = 5.0
DEFAULT_K_SLACK = 0.5


@dataclass(frozen=True)
class CusumParams:
    mu0: float
    sigma0: float
    k_ref: float
    h: float
    c_factor: float = 1.0

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise DomainError("sigma0 must be positive")
        if not self.h > 0:
            raise DomainError("threshold h must be positive")
        if self.k_ref < 0:
            raise DomainError("reference value K must be >= 0")

    @classmethod
    def from_baseline(
        cls,
        mu0: float,
        sigma0: float,
        c_factor: float = 1.0,
        k_slack: float = DEFAULT_K_SLACK,
    ) -> "CusumParams":
        """K = max(|mu0| / 2, k_slack * sigma0) and h = c_factor * 5 * sigma0."""
        if c_factor <= 0:
            raise DomainError("c_factor must be positive")
        k_ref = max(abs(mu0) / 2.0, k_slack * sigma0)
        return cls(mu0=mu0, sigma0=sigma0, k_ref=k_ref, h=c_factor * H_SIGMAS * sigma0, c_factor=c_factor)


@dataclass(frozen=True)
class CusumState:
    cp: float = 0.0
    cm: float = 0.0
    n: int = 0


@dataclass(frozen=True)
class Detection:
    t: int
    direction: str
    statistic: float


def estimate_baseline(training_residuals) -> tuple[float, float]:
    """Sample mean and (n - 1) standard deviation, the latter floored.

    The floor is ``max(1 person, 1e-9 * max|residual|)`` so that a perfect
    fit does not produce a zero threshold.
    """
    x = np.asarray(training_residuals, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise DomainError("need at least two residuals to estimate a baseline")
    mu0 = float(np.mean(x))
    sigma0 = float(np.std(x, ddof=1))
    floor = max(1.0, 1e-9 * float(np.max(np.abs(x))))
    return mu0, max(sigma0, floor)


def cusum_step(state: CusumState, x: float, params: CusumParams) -> CusumState:
    cp = max(0.0, state.cp + x - (params.mu0 + params.k_ref))
    cm = max(0.0, state.cm - x + (params.mu0 - params.k_ref))
    return CusumState(cp, cm, state.n + 1)


def cusum_path(residuals, params: CusumParams) -> tuple[np.ndarray, np.ndarray]:
    """Full (Cp, Cm) paths over a residual stream, without stopping."""
    x = np.asarray(residuals, dtype=float)
    cp = np.empty(len(x))
    cm = np.empty(len(x))
    state = CusumState()
    for k, value in enumerate(x):
        state = cusum_step(state, float(value), params)
        cp[k], cm[k] = state.cp, state.cm
    return cp, cm


def detect_forward(residuals, params: CusumParams, days=None) -> Detection | None:
    """First step at which either accumulator reaches ``h``.

    Without ``days`` the detection time is the 1-based step count, i.e. the
    number of residuals consumed; otherwise it is ``days[step - 1]``.
    """
    x = np.asarray(residuals, dtype=float)
    if days is not None and len(days) != len(x):
        raise DomainError("days must align with residuals")
    state = CusumState()
    for k, value in enumerate(x):
        if not math.isfinite(value):
            return None
        state = cusum_step(state, float(value), params)
        if state.cp >= params.h or state.cm >= params.h:
            if state.cp >= state.cm:
                direction, stat = POSITIVE, state.cp
            else:
                direction, stat = NEGATIVE, state.cm
            t = k + 1 if days is None else int(days[k])
            return Detection(t=t, direction=direction, statistic=stat)
    return None


def backward_residuals(
    obs: ObservedSeries,
    theta_new: ModelParams,
    tau: int,
    fit_window,
    spec: InitialStateSpec,
    cfg: IntegratorConfig | None = None,
    x_start: SeidrState | None = None,
    stop: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Residuals of the reverse-time model, ordered from ``tau - 1`` down to ``stop``.

    The model is run forward over ``fit_window = (T, tau)`` from its initial
    state, then integrated in reverse from its state at ``tau``.  Returns
    ``(days, residuals)``; the stream is cut where the reverse solution stops
    being finite.
    """
    cfg = cfg or IntegratorConfig()
    t_fit, t_tau = (int(w) for w in fit_window)
    if t_tau != tau:
        raise DomainError("fit window must end at tau")
    if not 0 <= stop < t_fit < tau <= obs.last:
        raise DomainError(f"need 0 <= stop < T < tau <= {obs.last}, got stop={stop}, T={t_fit}, tau={tau}")
    if tau - t_fit < 2:
        raise DomainError("backward window shorter than 2 days")
    if x_start is None:
        x_start = build_initial_state(obs, t_fit, spec)
    p = theta_new.as_array()
    fwd, info = simulate_batch(p, x_start.as_array(), tau - t_fit, cfg)
    back, _ = simulate_batch(p, fwd[-1], tau - stop, cfg, reverse=True, strict=False, lag=info["lag"])
    model = back[1:, DEATHS]
    days = tau - np.arange(1, tau - stop + 1)
    finite = np.isfinite(model)
    if not finite.all():
        cut = int(np.argmin(finite))
        model, days = model[:cut], days[:cut]
    return days, obs.deaths[days] - model


def detect_backward(
    obs: ObservedSeries,
    theta_new: ModelParams,
    tau: int,
    fit_window,
    params: CusumParams,
    spec: InitialStateSpec,
    cfg: IntegratorConfig | None = None,
    x_start: SeidrState | None = None,
    stop: int = 0,
) -> Detection | None:
    """CUSUM run on the reverse-time residual stream; the detection day is forward time."""
    days, resid = backward_residuals(obs, theta_new, tau, fit_window, spec, cfg, x_start, stop)
    return detect_forward(resid, params, days=days)


def two_way_estimate(t_forward: int, t_backward: int) -> int:
    """Midpoint of the two detection days, halves rounded up."""
    return int(math.floor((t_forward + t_backward) / 2.0 + 0.5))
