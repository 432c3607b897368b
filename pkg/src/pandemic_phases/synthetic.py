"""Piecewise-constant synthetic epidemics used as a ground-truth oracle."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .model import IntegratorConfig, ModelParams, SeidrState, integrate_forward
from .series import ObservedSeries, monotone_repair


@dataclass(frozen=True)
class SyntheticSpec:
    """``phases`` is a sequence of ``(duration_days, ModelParams)``.

    The series has ``1 + sum(durations)`` days; phase ``k`` drives the
    dynamics from the cumulative duration of the earlier phases onward.
    """

    phases: tuple
    initial: SeidrState
    noise_sd: float = 0.0
    seed: int = 0
    start_date: dt.date = dt.date(2020, 4, 1)
    cfg: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        phases = tuple((int(d), theta) for d, theta in self.phases)
        if not phases:
            raise DomainError("at least one phase is required")
        for duration, theta in phases:
            if duration < 1:
                raise DomainError("phase durations must be >= 1 day")
            if not isinstance(theta, ModelParams):
                raise DomainError("phase parameters must be ModelParams")
        if self.noise_sd < 0:
            raise DomainError("noise_sd must be >= 0")
        object.__setattr__(self, "phases", phases)

    @property
    def switch_days(self) -> list[int]:
        return list(np.cumsum([d for d, _ in self.phases])[:-1])


def simulate_phases(spec: SyntheticSpec) -> np.ndarray:
    """Noise-free daily states, shape ``(1 + sum(durations), 7)``."""
    blocks = [spec.initial.as_array()[None, :]]
    state = spec.initial
    for duration, theta in spec.phases:
        traj = integrate_forward(theta, state, duration, spec.cfg)
        blocks.append(traj.values[1:])
        state = traj.final
    return np.concatenate(blocks)


def generate_synthetic(spec: SyntheticSpec) -> ObservedSeries:
    """Observed-style series sampled from the piecewise model.

    Confirmed cases are ``I + D + R`` (everyone who ever became symptomatic).
    Gaussian noise with ``noise_sd`` is added to the daily death increments,
    which are then re-accumulated and repaired to stay non-decreasing.
    """
    values = simulate_phases(spec)
    infected, deaths, recovered = values[:, 4], values[:, 5], values[:, 6]
    if spec.noise_sd > 0:
        rng = np.random.default_rng(spec.seed)
        increments = np.diff(deaths) + rng.normal(0.0, spec.noise_sd, len(deaths) - 1)
        deaths = monotone_repair(np.concatenate([[deaths[0]], deaths[0] + np.cumsum(increments)]))
    return ObservedSeries(
        start_date=spec.start_date,
        confirmed=infected + deaths + recovered,
        deaths=deaths,
        recovered=recovered,
        active=infected,
        label="synthetic",
    )
