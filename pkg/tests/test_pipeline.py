from __future__ import annotations

import numpy as np
import pytest

from conftest import THETA_A_SEARCH, default_start, theta_from_search
from pandemic_phases import (
    DomainError,
    DynamicConfig,
    InitialStateSpec,
    InsufficientDataError,
    SyntheticSpec,
    dynamic_phase_detection,
    generate_synthetic,
)
from pandemic_phases.changepoint import cusum_step
from pandemic_phases.pipeline import CusumState, carry_over, residual_stream

CFG = DynamicConfig(spec=InitialStateSpec(6.7e7))


@pytest.fixture(scope="module")
def regimes():
    theta = theta_from_search(THETA_A_SEARCH)
    return theta, theta.replace(c1=3 * theta.c1, c2=3 * theta.c2)


@pytest.fixture(scope="module")
def single(regimes):
    obs = generate_synthetic(SyntheticSpec(((90, regimes[0]),), default_start()))
    return obs, dynamic_phase_detection(obs, CFG)


@pytest.fixture(scope="module")
def switched(regimes):
    theta, tripled = regimes
    obs = generate_synthetic(SyntheticSpec(((45, theta), (45, tripled)), default_start()))
    return obs, dynamic_phase_detection(obs, CFG)


def test_single_regime_refits_without_detection(single):
    _, tl = single
    assert len(tl.phases) == 1
    assert tl.phases[0].refits == [30, 60, 90]
    assert tl.detections == []
    assert tl.phases[0].tau_r == 90


def test_switch_gives_two_phases(switched):
    _, tl = switched
    assert len(tl.phases) == 2
    (t,) = tl.change_points
    assert 45 <= t <= 60
    (refined,) = tl.refined_change_points
    assert refined is not None and 40 <= refined <= 55
    second = tl.phases[1]
    assert second.tau_l == t and second.fit.window[0] == t
    assert tl.detections[0].direction == "positive"


def test_monitored_stream_replays_detection(switched):
    obs, tl = switched
    first = tl.phases[0]
    days = first.monitor_days
    assert days == list(range(first.refits[0] + 1, tl.change_points[0] + 1))
    # the last segment's parameters, fed the same residuals, fire on the recorded day
    seg = first.segments[-1]
    state = CusumState()
    fired = None
    for day, x in zip(days, first.monitor_residuals):
        if day < seg["start"]:
            continue
        state = cusum_step(state, x, seg["params"])
        if max(state.cp, state.cm) >= seg["params"].h:
            fired = day
            break
    assert fired == tl.change_points[0]


def test_residual_stream_matches_monitor(single):
    obs, tl = single
    phase = tl.phases[0]
    resid = residual_stream(phase, obs, phase.tau_l)
    assert len(resid) == len(obs)
    assert np.max(np.abs(resid)) <= 1e-3 * obs.deaths.max()
    with pytest.raises(DomainError):
        residual_stream(phase, obs, phase.tau_l - 1)


def test_carry_over_reanchors_deaths(switched):
    obs, tl = switched
    fit = tl.phases[0].fit
    x = carry_over(fit, obs, 50, CFG.integrator)
    assert x.dd == obs.deaths[50]
    assert x.total == pytest.approx(fit.x0.total, rel=1e-12)


def test_too_short_series(regimes):
    obs = generate_synthetic(SyntheticSpec(((CFG.delta - 1, regimes[0]),), default_start()))
    assert len(obs) == CFG.delta
    with pytest.raises(InsufficientDataError):
        dynamic_phase_detection(obs, CFG)
    assert issubclass(InsufficientDataError, DomainError)


def test_config_validation():
    with pytest.raises(DomainError):
        DynamicConfig(spec=InitialStateSpec(1e6), delta=3)
