"""Least-squares fitting of the SEIDR parameters to cumulative deaths.

The search runs over ``(R0, c1, c2, sigma, m21, n21, d, r, alpha)``; the
contact rate is recovered as ``beta = R0 * (r + d)``.  A seeded differential
evolution pass over the box is followed by a bounded least-squares polish
on the daily residual vector.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DomainError, FitError
from .model import (
    DEATHS,
    IntegratorConfig,
    ModelParams,
    SeidrState,
    Trajectory,
    integrate_forward,
    simulate_batch,
)
from .series import ObservedSeries

log = logging.getLogger(__name__)

SEARCH_NAMES = ("r0", "c1", "c2", "sigma", "m21", "n21", "d", "r", "alpha")

MIN_FIT_DAYS = 14


@dataclass(frozen=True)
class ParamBounds:
    """Box constraints in search coordinates (R0 replaces beta)."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != (9,) or hi.shape != (9,):
            raise DomainError("bounds need 9 entries ordered as " + ", ".join(SEARCH_NAMES))
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise DomainError("bounds must be finite")
        if np.any(lo > hi):
            bad = [SEARCH_NAMES[k] for k in np.flatnonzero(lo > hi)]
            raise DomainError(f"lower bound exceeds upper bound for {bad}")
        if np.any(lo < 0):
            raise DomainError("bounds must be non-negative")
        if hi[8] > 1:
            raise DomainError("alpha bounds must lie within [0, 1]")
        object.__setattr__(self, "lower", tuple(float(v) for v in lo))
        object.__setattr__(self, "upper", tuple(float(v) for v in hi))

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    @classmethod
    def from_dict(cls, ranges: dict) -> "ParamBounds":
        missing = [name for name in SEARCH_NAMES if name not in ranges]
        if missing:
            raise DomainError(f"bounds missing for {missing}")
        return cls(
            tuple(ranges[name][0] for name in SEARCH_NAMES),
            tuple(ranges[name][1] for name in SEARCH_NAMES),
        )

    def as_dict(self) -> dict[str, list[float]]:
        return {name: [lo, hi] for name, lo, hi in zip(SEARCH_NAMES, self.lower, self.upper)}

    @classmethod
    def uk(cls) -> "ParamBounds":
        return cls.from_dict(UK_BOUNDS)

    @classmethod
    def us(cls) -> "ParamBounds":
        return cls.from_dict(US_BOUNDS)

    @classmethod
    def pinned(cls, theta: ModelParams) -> "ParamBounds":
        z = to_search(theta)
        return cls(tuple(z), tuple(z))

    def contains(self, theta: ModelParams, rtol: float = 1e-9) -> bool:
        z = to_search(theta)
        slack = rtol * np.maximum(np.abs(self.hi), 1.0)
        return bool(np.all(z >= self.lo - slack) and np.all(z <= self.hi + slack))


UK_BOUNDS = {
    "r0": (2.0, 5.0),
    "c1": (0.5, 2.0),
    "c2": (0.1, 0.8),
    "sigma": (0.005, 0.3),
    "m21": (0.2, 0.8),
    "n21": (0.4, 0.99),
    "d": (0.0006, 0.02),
    "r": (0.10, 0.40),
    "alpha": (0.08, 0.20),
}

US_BOUNDS = {
    "r0": (2.0, 5.0),
    "c1": (0.1, 2.0),
    "c2": (0.01, 0.6),
    "sigma": (0.001, 1.0),
    "m21": (0.3, 0.9),
    "n21": (0.6, 0.99),
    "d": (0.0006, 0.02),
    "r": (0.20, 0.50),
    "alpha": (0.001, 0.09),
}


def to_search(theta: ModelParams) -> np.ndarray:
    """Map model parameters to search coordinates (R0 in place of beta)."""
    z = theta.as_array()
    removal = theta.d + theta.r
    z[0] = theta.beta / removal if removal > 0 else 0.0
    return z


def from_search(z) -> np.ndarray:
    """Search coordinates (9,) or (9, S) to model parameter arrays of the same shape."""
    p = np.array(z, dtype=float)
    p[0] = p[0] * (p[6] + p[7])
    return p


@dataclass(frozen=True)
class InitialStateSpec:
    """How to seed the hidden compartments from one day of observations."""

    population: float
    exposed_ratio: float = 2.0
    group1_fraction: float = 0.5
    infection_scale: float = 1.0

    def __post_init__(self):
        if not self.population > 0:
            raise DomainError("population must be positive")
        if self.exposed_ratio < 0 or self.infection_scale < 0:
            raise DomainError("exposed_ratio and infection_scale must be >= 0")
        if not 0.0 <= self.group1_fraction <= 1.0:
            raise DomainError("group1_fraction must lie in [0, 1]")


POLISH_METHODS = ("trf", "nelder-mead", "none")


@dataclass(frozen=True)
class FitConfig:
    """Optimizer budget.

    ``polish`` selects the local refinement after the global search:
    ``trf`` is a bounded trust-region least-squares solve on the residual
    vector, ``nelder-mead`` a simplex search with reflection at the box.
    """

    seed: int = 0
    popsize: int = 15
    maxiter: int = 60
    tol: float = 1e-6
    polish: str = "trf"
    polish_maxiter: int = 400

    def __post_init__(self):
        if self.polish not in POLISH_METHODS:
            raise DomainError(f"unknown polish method {self.polish!r}")
        if self.popsize < 1 or self.maxiter < 1:
            raise DomainError("popsize and maxiter must be >= 1")


@dataclass
class FitResult:
    theta: ModelParams
    r0: float
    v: float | None
    train_mse: float
    x0: SeidrState
    window: tuple[int, int]
    trajectory: Trajectory
    optimizer_trace: dict = field(default_factory=dict)

    @property
    def t_start(self) -> int:
        return self.window[0]

    @property
    def t_end(self) -> int:
        return self.window[1]

    def model_deaths(self, t_from: int, t_to: int, cfg: IntegratorConfig | None = None) -> np.ndarray:
        """Model cumulative deaths for days ``t_from .. t_to`` (inclusive)."""
        if t_from < self.t_start:
            raise DomainError("cannot evaluate the fit before its start day")
        horizon = t_to - self.t_start
        if horizon < len(self.trajectory):
            traj = self.trajectory
        else:
            traj = integrate_forward(self.theta, self.x0, horizon, cfg, t0=self.t_start)
        return traj.deaths[t_from - self.t_start : horizon + 1]


def build_initial_state(obs: ObservedSeries, t0: int, spec: InitialStateSpec) -> SeidrState:
    """Seed the seven compartments from the observations of day ``t0``."""
    if not 0 <= t0 < len(obs):
        raise DomainError(f"day {t0} outside series of length {len(obs)}")
    deaths = float(obs.deaths[t0])
    recovered = float(obs.recovered[t0])
    infected = spec.infection_scale * float(obs.active[t0])
    exposed = spec.exposed_ratio * infected
    g = spec.group1_fraction
    susceptible = spec.population - deaths - recovered - infected - exposed
    if susceptible < 0:
        raise DomainError(
            f"population {spec.population:g} cannot cover the observed counts on day {t0}"
        )
    e1 = g * exposed
    s1 = g * susceptible
    return SeidrState(
        s1=s1,
        s2=susceptible - s1,
        e1=e1,
        e2=exposed - e1,
        i=infected,
        dd=deaths,
        rr=recovered,
    )


def _check_window(obs: ObservedSeries, window, min_days: int) -> tuple[int, int]:
    t_start, t_end = (int(w) for w in window)
    if not 0 <= t_start < t_end <= obs.last:
        raise DomainError(f"window {window} outside series of length {len(obs)}")
    if t_end - t_start < min_days:
        raise DomainError(f"window {window} shorter than {min_days} days")
    return t_start, t_end


def _batch_mse(z: np.ndarray, target: np.ndarray, x0: np.ndarray, cfg: IntegratorConfig) -> np.ndarray:
    """MSE for a (9, S) block of search vectors; failed integrations score +inf."""
    p = from_search(z)
    samples, _ = simulate_batch(p, x0, len(target), cfg, strict=False)
    deaths = samples[1:, DEATHS, :]
    with np.errstate(over="ignore", invalid="ignore"):
        mse = np.mean((target[:, None] - deaths) ** 2, axis=0)
    mse[~np.isfinite(mse)] = np.inf
    return mse


def objective_mse(
    theta: ModelParams,
    obs: ObservedSeries,
    window,
    spec: InitialStateSpec,
    cfg: IntegratorConfig | None = None,
    x0: SeidrState | None = None,
) -> float:
    """Mean squared error between observed and modelled cumulative deaths.

    The model starts on ``window[0]`` from ``build_initial_state`` (or from
    ``x0`` when given) and is compared on the ``T = window[1] - window[0]``
    following days.
    """
    cfg = cfg or IntegratorConfig()
    t_start, t_end = _check_window(obs, window, 1)
    if x0 is None:
        x0 = build_initial_state(obs, t_start, spec)
    traj = integrate_forward(theta, x0, t_end - t_start, cfg, t0=t_start)
    resid = obs.deaths[t_start + 1 : t_end + 1] - traj.deaths[1:]
    return float(np.mean(resid**2))


def _polish_trf(expand, u0, target, x0_arr, cfg, max_nfev):
    """Bounded least squares in unit coordinates with a batched forward-difference Jacobian."""
    k = len(u0)

    def resid_batch(u):
        p = from_search(expand(u))
        samples, _ = simulate_batch(p, x0_arr, len(target), cfg, strict=False)
        return samples[1:, DEATHS, :] - target[:, None]

    def fun(u):
        r = resid_batch(u[:, None])[:, 0]
        return np.where(np.isfinite(r), r, 1e300)

    def jac(u):
        step = 1e-7 * np.maximum(1.0, np.abs(u))
        step = np.where(u + step > 1.0, -step, step)
        cols = u[:, None] + np.diag(step)
        r = resid_batch(np.concatenate([u[:, None], cols], axis=1))
        J = (r[:, 1:] - r[:, :1]) / step[None, :]
        return np.where(np.isfinite(J), J, 0.0)

    u0 = np.clip(u0, 0.0, 1.0)
    ls = optimize.least_squares(
        fun, u0, jac=jac, bounds=(np.zeros(k), np.ones(k)), method="trf",
        x_scale="jac", xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=max_nfev,
    )
    u = np.clip(ls.x, 0.0, 1.0)
    j = float(np.mean(fun(u) ** 2))
    return u, (j if math.isfinite(j) else math.inf), int(ls.nfev) + int(ls.njev or 0) * (k + 1)


def _reflect_unit(u: np.ndarray) -> np.ndarray:
    u = np.mod(u, 2.0)
    return np.where(u > 1.0, 2.0 - u, u)


def fit_parameters(
    obs: ObservedSeries,
    window,
    bounds: ParamBounds,
    spec: InitialStateSpec,
    fit_cfg: FitConfig | None = None,
    cfg: IntegratorConfig | None = None,
    x0: SeidrState | None = None,
) -> FitResult:
    """Minimise the death MSE over ``window`` inside ``bounds``.

    ``x0`` overrides the initial state built from ``spec``.  The result is a
    deterministic function of the inputs and ``fit_cfg.seed``.
    """
    fit_cfg = fit_cfg or FitConfig()
    cfg = cfg or IntegratorConfig()
    t_start, t_end = _check_window(obs, window, MIN_FIT_DAYS)
    if x0 is None:
        x0 = build_initial_state(obs, t_start, spec)
    x0_arr = x0.as_array()
    target = np.asarray(obs.deaths[t_start + 1 : t_end + 1], dtype=float)

    lo, hi = bounds.lo, bounds.hi
    free = hi > lo
    width = hi - lo

    def expand(u):
        # unit-cube coordinates of the free parameters -> full search vectors
        u = np.atleast_2d(np.asarray(u, dtype=float).T).T
        z = np.repeat(lo[:, None], u.shape[1], axis=1)
        z[free] = lo[free, None] + u * width[free, None]
        return z

    def batch(u):
        return _batch_mse(expand(u), target, x0_arr, cfg)

    trace = {"seed": int(fit_cfg.seed), "nfev": 0, "nit": 0, "converged": True}
    best_u = np.zeros(int(free.sum()))
    best_j = math.inf

    if free.any():
        de = optimize.differential_evolution(
            batch,
            bounds=[(0.0, 1.0)] * int(free.sum()),
            popsize=fit_cfg.popsize,
            maxiter=fit_cfg.maxiter,
            tol=fit_cfg.tol,
            seed=fit_cfg.seed,
            polish=False,
            init="latinhypercube",
            updating="deferred",
            vectorized=True,
        )
        trace["nfev"] += int(de.nfev)
        trace["nit"] += int(de.nit)
        trace["converged"] = bool(de.success)
        best_u, best_j = np.array(de.x), float(de.fun)

        if fit_cfg.polish == "trf" and math.isfinite(best_j):
            u, j, nfev = _polish_trf(expand, best_u, target, x0_arr, cfg, fit_cfg.polish_maxiter)
            trace["nfev"] += nfev
            if j < best_j:
                best_u, best_j = u, j
        elif fit_cfg.polish == "nelder-mead" and math.isfinite(best_j):
            nm = optimize.minimize(
                lambda u: float(batch(_reflect_unit(u)[:, None])[0]),
                best_u,
                method="Nelder-Mead",
                options={
                    "maxiter": fit_cfg.polish_maxiter,
                    "xatol": 1e-9,
                    "fatol": 1e-12 * max(best_j, 1.0),
                    "adaptive": True,
                },
            )
            trace["nfev"] += int(nm.nfev)
            trace["nit"] += int(nm.nit)
            if nm.fun < best_j:
                best_u, best_j = _reflect_unit(np.asarray(nm.x)), float(nm.fun)
    else:
        best_j = float(batch(np.zeros((0, 1)))[0])

    if not math.isfinite(best_j):
        raise FitError("no parameter vector in the box produced a finite trajectory")

    theta = ModelParams.from_array(from_search(expand(best_u)[:, 0]))
    traj = integrate_forward(theta, x0, t_end - t_start, cfg, t0=t_start)
    train_mse = float(np.mean((target - traj.deaths[1:]) ** 2))
    try:
        v = vertical_adjustment(traj.column("i"), obs.active[t_start : t_end + 1])
    except DomainError:
        v = None
    log.debug("fit %s: J=%.6g after %d evaluations", (t_start, t_end), train_mse, trace["nfev"])
    return FitResult(
        theta=theta,
        r0=float(to_search(theta)[0]),
        v=v,
        train_mse=train_mse,
        x0=x0,
        window=(t_start, t_end),
        trajectory=traj,
        optimizer_trace=trace,
    )


def vertical_adjustment(predicted, reported) -> float:
    """Least-squares scale ``v`` with ``predicted ~ v * reported``.

    The adjusted model curve is ``predicted / v``.
    """
    p = np.asarray(predicted, dtype=float)
    r = np.asarray(reported, dtype=float)
    if p.shape != r.shape or p.ndim != 1 or len(p) < 1:
        raise DomainError("predicted and reported must be 1-d series of equal length >= 1")
    denom = float(np.dot(r, r))
    if denom <= 0:
        raise DomainError("reported series is identically zero")
    v = float(np.dot(p, r)) / denom
    return max(v, np.finfo(float).tiny)


@dataclass
class ValidationReport:
    holdout: tuple[int, int]
    days: np.ndarray
    observed: np.ndarray
    projected: np.ndarray
    residuals: np.ndarray
    holdout_mse: float
    v: float | None
    adjusted_infections: np.ndarray
    reported_infections: np.ndarray

    @property
    def max_relative_error(self) -> float:
        scale = np.maximum(np.abs(self.observed), 1.0)
        return float(np.max(np.abs(self.residuals) / scale))


def validate(
    fit: FitResult,
    obs: ObservedSeries,
    horizon: int = 30,
    cfg: IntegratorConfig | None = None,
) -> ValidationReport:
    """Project the fit over the ``horizon`` days after its window and score it."""
    t_end = fit.t_end
    first, last = t_end + 1, t_end + horizon
    if horizon < 1 or last > obs.last:
        raise DomainError(f"holdout [{first}, {last}] outside data range [0, {obs.last}]")
    traj = integrate_forward(fit.theta, fit.x0, last - fit.t_start, cfg, t0=fit.t_start)
    offset = first - fit.t_start
    projected = traj.deaths[offset:]
    observed = obs.deaths[first : last + 1]
    residuals = observed - projected
    infections = traj.column("i")
    reported = obs.active[fit.t_start : last + 1]
    try:
        v = vertical_adjustment(infections, reported)
        adjusted = infections / v
    except DomainError:
        v, adjusted = None, np.full_like(infections, np.nan)
    return ValidationReport(
        holdout=(first, last),
        days=np.arange(first, last + 1),
        observed=observed,
        projected=projected,
        residuals=residuals,
        holdout_mse=float(np.mean(residuals**2)),
        v=v,
        adjusted_infections=adjusted,
        reported_infections=reported,
    )
