"""What-if projections that scale the contact rate with exposed individuals."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IntegrationError
from .model import IntegratorConfig, ModelParams, SeidrState, integrate_forward


@dataclass
class ScenarioSet:
    base_theta: ModelParams
    multipliers: list[float]
    horizon: int
    v: float | None
    deaths: dict[float, np.ndarray] = field(default_factory=dict)
    infections: dict[float, np.ndarray] = field(default_factory=dict)
    failures: dict[float, str] = field(default_factory=dict)

    def final_deaths(self) -> dict[float, float]:
        return {k: float(d[-1]) for k, d in self.deaths.items()}


def scenario_projection(
    theta: ModelParams,
    x0: SeidrState,
    v: float | None,
    multipliers,
    horizon: int,
    cfg: IntegratorConfig | None = None,
) -> ScenarioSet:
    """Run the model with ``c1`` replaced by ``k * c1`` for every multiplier ``k``.

    Infections are divided by ``v`` when one is given, so they are on the
    scale of reported cases.  A scenario whose integration fails is recorded
    in ``failures`` and the others still run.
    """
    multipliers = [float(k) for k in multipliers]
    if not multipliers:
        raise DomainError("at least one multiplier is required")
    if any(k <= 0 for k in multipliers):
        raise DomainError("multipliers must be positive")
    if horizon < 1:
        raise DomainError("horizon must be >= 1 day")
    out = ScenarioSet(base_theta=theta, multipliers=multipliers, horizon=int(horizon), v=v)
    for k in multipliers:
        try:
            traj = integrate_forward(theta.replace(c1=k * theta.c1), x0, horizon, cfg)
        except IntegrationError as exc:
            out.failures[k] = str(exc)
            continue
        out.deaths[k] = traj.deaths.copy()
        infections = traj.column("i")
        out.infections[k] = infections / v if v else infections.copy()
    return out
