"""Two-group SEIDR compartment model and its time integrators.

The population is split into a careful group 1 (subscript 1) and a careless
group 2.  Susceptibles and exposed individuals migrate from group 2 to
group 1; migration in the other direction is assumed to be zero, so the
total population is conserved.

State vectors are ordered ``(S1, S2, E1, E2, I, D, R)`` and parameter
vectors ``(beta, c1, c2, sigma, m21, n21, d, r, alpha)``.  Internally every
routine works on arrays whose leading axis is the compartment (or parameter)
axis, so a whole optimizer population can be integrated in one call.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError, IntegrationError

PARAM_NAMES = ("beta", "c1", "c2", "sigma", "m21", "n21", "d", "r", "alpha")
COMPARTMENTS = ("s1", "s2", "e1", "e2", "i", "dd", "rr")
SCHEMES = ("midpoint", "leapfrog", "rk4")

# index of the cumulative-death compartment
DEATHS = 5


@dataclass(frozen=True)
class ModelParams:
    """Rates of the SEIDR model (all per day except the probability alpha)."""

    beta: float
    c1: float
    c2: float
    sigma: float
    m21: float
    n21: float
    d: float
    r: float
    alpha: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise DomainError(f"{name} must be finite and >= 0, got {value!r}")
            object.__setattr__(self, name, value)
        if self.alpha > 1:
            raise DomainError(f"alpha is a probability, got {self.alpha!r}")

    @property
    def r0(self) -> float:
        return reproduction_rate(self)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAM_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values) -> "ModelParams":
        values = np.asarray(values, dtype=float)
        if values.shape != (len(PARAM_NAMES),):
            raise DomainError(f"expected {len(PARAM_NAMES)} parameters, got shape {values.shape}")
        return cls(*(float(v) for v in values))

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class SeidrState:
    """Compartment sizes (persons) at one instant."""

    s1: float = 0.0
    s2: float = 0.0
    e1: float = 0.0
    e2: float = 0.0
    i: float = 0.0
    dd: float = 0.0
    rr: float = 0.0

    def __post_init__(self):
        for name in COMPARTMENTS:
            object.__setattr__(self, name, float(getattr(self, name)))

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in COMPARTMENTS], dtype=float)

    @classmethod
    def from_array(cls, values) -> "SeidrState":
        values = np.asarray(values, dtype=float)
        if values.shape != (len(COMPARTMENTS),):
            raise DomainError(f"expected {len(COMPARTMENTS)} compartments, got shape {values.shape}")
        return cls(*(float(v) for v in values))

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)

    @property
    def total(self) -> float:
        return total_population(self)


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integration settings.

    ``midpoint`` is the implicit midpoint rule: symmetric (exactly
    time-reversible) and A-stable.  ``leapfrog`` is the explicit two-step
    scheme ``x[n+1] = x[n-1] + 2h f(x[n])``; it is also reversible but its
    parasitic mode grows like ``exp(rate * t)`` on decaying compartments, so
    it is only usable over short horizons.  ``rk4`` is forward-only.
    """

    substeps_per_day: int = 20
    scheme: str = "midpoint"

    def __post_init__(self):
        if int(self.substeps_per_day) != self.substeps_per_day or self.substeps_per_day < 1:
            raise DomainError(f"substeps_per_day must be a positive integer, got {self.substeps_per_day!r}")
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")

    @property
    def h(self) -> float:
        return 1.0 / self.substeps_per_day


@dataclass
class Trajectory:
    """Daily samples of an integration run.

    ``values[k]`` is the state at day ``t0 + step * k``; reverse-time runs
    have ``step == -1``.
    """

    t0: int
    step: int
    values: np.ndarray
    clamped: bool = False
    negative: bool = False
    # leapfrog keeps two time levels; this is the substep preceding the last sample
    lag: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def days(self) -> np.ndarray:
        return self.t0 + self.step * np.arange(len(self.values))

    @property
    def states(self) -> list[SeidrState]:
        return [SeidrState.from_array(row) for row in self.values]

    def state(self, k: int) -> SeidrState:
        return SeidrState.from_array(self.values[k])

    @property
    def final(self) -> SeidrState:
        return self.state(-1)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, COMPARTMENTS.index(name)]

    @property
    def deaths(self) -> np.ndarray:
        return self.values[:, DEATHS]

    @property
    def totals(self) -> np.ndarray:
        return self.values.sum(axis=1)


def reproduction_rate(theta: ModelParams) -> float:
    """``beta / (d + r)``."""
    removal = theta.d + theta.r
    if removal <= 0:
        raise DomainError("reproduction rate undefined when d + r == 0")
    return theta.beta / removal


def total_population(x: SeidrState) -> float:
    return float(sum(getattr(x, name) for name in COMPARTMENTS))


def rhs(p: np.ndarray, x: np.ndarray, n_total) -> np.ndarray:
    """Vectorised right-hand side; ``p`` is (9, ...) and ``x`` is (7, ...)."""
    beta, c1, c2, sigma, m21, n21, d, r, alpha = p
    s1, s2, e1, e2, i = x[0], x[1], x[2], x[3], x[4]
    force = beta * (c1 * (alpha * e1 + e2) + c2 * alpha * i) / n_total
    inf1 = alpha * force * s1
    inf2 = force * s2
    mig_s = m21 * s2
    mig_e = n21 * e2
    onset = sigma * (e1 + e2)
    deaths = d * i
    recoveries = r * i
    return np.array(
        [
            -inf1 + mig_s,
            -inf2 - mig_s,
            inf1 + mig_e - sigma * e1,
            inf2 - mig_e - sigma * e2,
            onset - deaths - recoveries,
            deaths,
            recoveries,
        ]
    )


def derivative(theta: ModelParams, x: SeidrState, n_total: float) -> SeidrState:
    """Time derivatives of every compartment, returned as a state of rates."""
    n_total = float(n_total)
    if not math.isfinite(n_total) or n_total <= 0:
        raise DomainError(f"n_total must be positive and finite, got {n_total!r}")
    arr = x.as_array()
    if not np.all(np.isfinite(arr)):
        raise DomainError("state has non-finite components")
    if np.any(arr < 0):
        raise DomainError("state has negative components")
    return SeidrState.from_array(rhs(theta.as_array(), arr, n_total))


# --- fixed-step integration ---------------------------------------------

_SCHEME_CODES = {"midpoint": _kernels.MIDPOINT, "leapfrog": _kernels.LEAPFROG, "rk4": _kernels.RK4}
# fixed-point tolerance of the implicit midpoint solve, relative to the population
_MIDPOINT_RTOL = 4e-16


def simulate_batch(
    p: np.ndarray,
    x0: np.ndarray,
    days: int,
    cfg: IntegratorConfig,
    *,
    reverse: bool = False,
    clamp: bool | None = None,
    strict: bool = True,
    lag: np.ndarray | None = None,
):
    """Integrate one or many systems for ``days`` days.

    ``p`` has shape (9,) or (9, B) and ``x0`` shape (7,) or (7, B); either
    may be broadcast against the other.  Returns ``(samples, info)`` where
    ``samples`` has shape (days + 1, 7) or (days + 1, 7, B) and ``info`` holds
    per-member ``status``/``fail_day`` arrays plus ``clamped``, ``negative``
    and ``lag``.  With ``strict=False`` a member that blows up carries NaN
    from the failing day on instead of raising.
    """
    if int(days) != days or days < 1:
        raise DomainError(f"days must be a positive integer, got {days!r}")
    days = int(days)
    if clamp is None:
        clamp = not reverse
    p = np.asarray(p, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    single = p.ndim == 1 and x0.ndim == 1
    P = np.atleast_2d(p.T) if p.ndim == 2 else p[None, :]
    X = np.atleast_2d(x0.T) if x0.ndim == 2 else x0[None, :]
    B = max(len(P), len(X))
    P = np.ascontiguousarray(np.broadcast_to(P, (B, 9)))
    X = np.ascontiguousarray(np.broadcast_to(X, (B, 7)))
    n_total = X.sum(axis=1)
    if np.any(~(n_total > 0)):
        raise DomainError("total population must be positive")
    use_lag = lag is not None
    if use_lag:
        lag_arr = np.asarray(lag, dtype=float)
        lag_arr = np.ascontiguousarray(np.broadcast_to(lag_arr.T if lag_arr.ndim == 2 else lag_arr[None, :], (B, 7)))
    else:
        lag_arr = np.zeros((B, 7))
    h = -cfg.h if reverse else cfg.h
    out, status, fail_day, clamped, last_prev = _kernels.integrate(
        P, X, days, cfg.substeps_per_day, _SCHEME_CODES[cfg.scheme], h, bool(clamp), lag_arr, use_lag, _MIDPOINT_RTOL
    )
    if strict and np.any(status != _kernels.OK):
        b = int(np.argmax(status != _kernels.OK))
        what = "implicit solve did not converge" if status[b] == _kernels.NO_CONVERGENCE else "non-finite state"
        raise IntegrationError(f"{what} on day {fail_day[b]}", day=int(fail_day[b]))
    with np.errstate(invalid="ignore"):
        negative = (out < -1e-6 * n_total[:, None, None]).any(axis=(1, 2))
    samples = np.moveaxis(out, 0, -1)
    info = {
        "status": status,
        "fail_day": fail_day,
        "clamped": clamped,
        "negative": negative,
        "lag": last_prev if cfg.scheme == "leapfrog" else None,
    }
    if single:
        samples = samples[..., 0]
        info = {k: (v[0] if v is not None else None) for k, v in info.items()}
    return samples, info


def _check_inputs(theta: ModelParams, x: SeidrState, days: int):
    if not isinstance(theta, ModelParams):
        raise DomainError("theta must be ModelParams")
    arr = x.as_array()
    if not np.all(np.isfinite(arr)):
        raise DomainError("initial state has non-finite components")
    if int(days) != days or days < 1:
        raise DomainError(f"days must be a positive integer, got {days!r}")
    return arr


def integrate_forward(
    theta: ModelParams,
    x0: SeidrState,
    days: int,
    cfg: IntegratorConfig | None = None,
    t0: int = 0,
) -> Trajectory:
    """Daily samples of the forward solution, ``days + 1`` of them starting with ``x0``.

    Negative compartments are clamped to zero after every substep.
    """
    cfg = cfg or IntegratorConfig()
    arr = _check_inputs(theta, x0, days)
    if np.any(arr < 0):
        raise DomainError("initial state has negative components")
    try:
        values, info = simulate_batch(theta.as_array(), arr, days, cfg)
    except IntegrationError as exc:
        exc.theta = theta
        raise
    return Trajectory(t0=t0, step=1, values=values, clamped=bool(info["clamped"]), lag=info["lag"])


def integrate_reverse(
    theta: ModelParams,
    x_end: SeidrState,
    days: int,
    cfg: IntegratorConfig | None = None,
    t_end: int = 0,
    lag: np.ndarray | None = None,
) -> Trajectory:
    """Integrate ``dy/dt = -f(y)`` from ``x_end``; sample ``k`` is forward day ``t_end - k``.

    No clamping is applied (it would break reversibility); ``negative`` is set
    when any component drops below ``-1e-6`` of the population.  For the
    leapfrog scheme, passing the forward run's ``lag`` makes the roundtrip
    exact instead of re-bootstrapping.
    """
    cfg = cfg or IntegratorConfig()
    arr = _check_inputs(theta, x_end, days)
    try:
        values, info = simulate_batch(theta.as_array(), arr, days, cfg, reverse=True, lag=lag)
    except IntegrationError as exc:
        exc.theta = theta
        raise
    return Trajectory(t0=t_end, step=-1, values=values, negative=bool(info["negative"]), lag=info["lag"])
