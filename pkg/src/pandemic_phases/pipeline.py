"""Dynamic phase detection: sliding-window refits with online CUSUM monitoring.

The state machine follows the usual streaming loop:

* fit the first phase on ``[0, delta]``;
* for every later day update the CUSUM on the residual of the current fit;
* after ``delta`` quiet days extend the window by ``delta`` and refit;
* on a threshold crossing at day ``T`` open a new phase fitted on
  ``[T, T + delta]`` and resume monitoring after it.

Accumulators are reset after every refit and every new phase.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .changepoint import (
    DEFAULT_K_SLACK,
    CusumParams,
    CusumState,
    Detection,
    cusum_step,
    detect_backward,
    estimate_baseline,
    two_way_estimate,
)
from .errors import DomainError, InsufficientDataError
from .fitting import (
    MIN_FIT_DAYS,
    FitConfig,
    FitResult,
    InitialStateSpec,
    ParamBounds,
    fit_parameters,
)
from .model import IntegratorConfig, ModelParams, SeidrState, integrate_forward
from .series import ObservedSeries

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DynamicConfig:
    """Settings of the dynamic detector.

    With ``carry_state`` a new phase starts from the previous phase's model
    state at the detection day (deaths re-anchored to the data) instead of
    re-seeding the hidden compartments from ``spec``.
    """

    spec: InitialStateSpec
    delta: int = 30
    bounds: ParamBounds = field(default_factory=ParamBounds.uk)
    c_factor: float = 1.0
    k_slack: float = DEFAULT_K_SLACK
    two_way: bool = True
    carry_state: bool = True
    fit: FitConfig = field(default_factory=FitConfig)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        if int(self.delta) != self.delta or self.delta < 7:
            raise DomainError("delta must be an integer >= 7")


@dataclass
class Phase:
    tau_l: int
    tau_r: int
    fit: FitResult | None
    baseline: tuple[float, float] | None
    detection: Detection | None = None
    refined_start: int | None = None
    backward_detection: Detection | None = None
    refits: list[int] = field(default_factory=list)
    # monitored stream: day index -> residual, in order
    monitor_days: list[int] = field(default_factory=list)
    monitor_residuals: list[float] = field(default_factory=list)
    # residuals are replayed against these parameters, one segment per (re)fit
    segments: list[dict] = field(default_factory=list)

    @property
    def theta(self) -> ModelParams | None:
        return self.fit.theta if self.fit else None

    @property
    def v(self) -> float | None:
        return self.fit.v if self.fit else None


@dataclass
class PhaseTimeline:
    phases: list[Phase]
    delta: int
    length: int

    @property
    def detections(self) -> list[Detection]:
        return [p.detection for p in self.phases if p.detection is not None]

    @property
    def change_points(self) -> list[int]:
        return [d.t for d in self.detections]

    @property
    def refined_change_points(self) -> list[int | None]:
        return [p.refined_start for p in self.phases if p.detection is not None]


def residual_stream(phase: Phase, obs: ObservedSeries, from_t: int, to_t: int | None = None,
                    cfg: IntegratorConfig | None = None) -> np.ndarray:
    """Observed minus modelled cumulative deaths on days ``from_t .. to_t``."""
    if phase.fit is None:
        raise DomainError("phase has no fitted parameters")
    if from_t < phase.tau_l:
        raise DomainError("residuals requested before the phase start")
    to_t = obs.last if to_t is None else to_t
    model = phase.fit.model_deaths(from_t, to_t, cfg)
    return obs.deaths[from_t : to_t + 1] - model


def carry_over(prev: FitResult, obs: ObservedSeries, t: int, cfg: IntegratorConfig) -> SeidrState:
    """Previous phase's model state on day ``t`` with deaths moved onto the data."""
    traj = integrate_forward(prev.theta, prev.x0, t - prev.t_start, cfg, t0=prev.t_start)
    x = traj.values[-1].copy()
    shift = float(obs.deaths[t]) - x[5]
    x[5] += shift
    susceptible = x[0] + x[1]
    if susceptible > 0:
        x[0] -= shift * x[0] / susceptible
        x[1] -= shift * x[1] / susceptible
    if np.any(x < 0):
        raise DomainError("cannot re-anchor carried state on the data")
    return SeidrState.from_array(x)


class _Runner:
    def __init__(self, obs: ObservedSeries, cfg: DynamicConfig):
        self.obs = obs
        self.cfg = cfg
        self.icfg = cfg.integrator

    def fit(self, t_start: int, t_end: int, x0: SeidrState | None) -> FitResult:
        return fit_parameters(
            self.obs, (t_start, t_end), self.cfg.bounds, self.cfg.spec, self.cfg.fit, self.icfg, x0=x0
        )

    def model_deaths(self, fit: FitResult) -> np.ndarray:
        """Fitted-model deaths from the fit start through the last observed day."""
        traj = integrate_forward(fit.theta, fit.x0, self.obs.last - fit.t_start, self.icfg, t0=fit.t_start)
        return traj.deaths

    def baseline(self, fit: FitResult) -> tuple[float, float]:
        t0, t1 = fit.window
        resid = self.obs.deaths[t0 + 1 : t1 + 1] - fit.trajectory.deaths[1:]
        mu0, sigma0 = estimate_baseline(resid)
        gate = 2.0 * sigma0 / math.sqrt(t1 - t0)
        if abs(mu0) > gate:
            log.warning("fit on %s leaves residual mean %.3g beyond %.3g", fit.window, mu0, gate)
        return mu0, sigma0

    def cusum(self, baseline) -> CusumParams:
        return CusumParams.from_baseline(*baseline, c_factor=self.cfg.c_factor, k_slack=self.cfg.k_slack)

    def open_phase(self, t_start: int, t_end: int, x0: SeidrState | None, detection: Detection | None) -> Phase:
        if t_end - t_start < MIN_FIT_DAYS:
            return Phase(tau_l=t_start, tau_r=t_end, fit=None, baseline=None, detection=detection)
        fit = self.fit(t_start, t_end, x0)
        phase = Phase(tau_l=t_start, tau_r=t_end, fit=fit, baseline=self.baseline(fit), detection=detection)
        phase.refits.append(t_end)
        return phase

    def refine(self, phase: Phase, stop: int):
        params = self.cusum(phase.baseline)
        back = detect_backward(
            self.obs,
            phase.fit.theta,
            phase.tau_r,
            (phase.tau_l, phase.tau_r),
            params,
            self.cfg.spec,
            self.icfg,
            x_start=phase.fit.x0,
            stop=stop,
        )
        phase.backward_detection = back
        if back is not None:
            phase.refined_start = two_way_estimate(phase.detection.t, back.t)

    def run(self) -> PhaseTimeline:
        obs, cfg = self.obs, self.cfg
        last = obs.last
        phase = self.open_phase(0, cfg.delta, None, None)
        phases = [phase]
        t = phase.tau_r + 1
        model = self.model_deaths(phase.fit)
        params = self.cusum(phase.baseline)
        state = CusumState()
        counter = 0
        phase.segments.append({"start": t, "params": params})
        while t <= last:
            x = float(obs.deaths[t] - model[t - phase.tau_l])
            phase.monitor_days.append(t)
            phase.monitor_residuals.append(x)
            state = cusum_step(state, x, params)
            counter += 1
            if state.cp < params.h and state.cm < params.h:
                if counter >= cfg.delta:
                    phase.tau_r += cfg.delta
                    phase.fit = self.fit(phase.tau_l, phase.tau_r, phase.fit.x0)
                    phase.baseline = self.baseline(phase.fit)
                    phase.refits.append(phase.tau_r)
                    model = self.model_deaths(phase.fit)
                    params = self.cusum(phase.baseline)
                    state = CusumState()
                    counter = 0
                    phase.segments.append({"start": t + 1, "params": params})
                t += 1
                continue

            direction = "positive" if state.cp >= state.cm else "negative"
            detection = Detection(t=t, direction=direction, statistic=max(state.cp, state.cm))
            log.info("new phase detected on day %d (%s)", t, direction)
            x0 = carry_over(phase.fit, obs, t, self.icfg) if cfg.carry_state else None
            stop = phase.tau_l
            phase = self.open_phase(t, min(t + cfg.delta, last), x0, detection)
            phases.append(phase)
            if phase.fit is None:
                break
            if cfg.two_way:
                self.refine(phase, stop)
            model = self.model_deaths(phase.fit)
            params = self.cusum(phase.baseline)
            state = CusumState()
            counter = 0
            t = phase.tau_r + 1
            phase.segments.append({"start": t, "params": params})
        return PhaseTimeline(phases=phases, delta=cfg.delta, length=len(obs))


def dynamic_phase_detection(obs: ObservedSeries, cfg: DynamicConfig) -> PhaseTimeline:
    """Segment ``obs`` into phases with separately fitted parameters."""
    if len(obs) < cfg.delta + 1:
        raise InsufficientDataError(
            f"series of {len(obs)} days is too short for a {cfg.delta}-day initial window"
        )
    return _Runner(obs, cfg).run()
