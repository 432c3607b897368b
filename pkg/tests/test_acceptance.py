"""Acceptance suite: one test per numbered criterion.

Each test records a PASS/FAIL/SKIP line that is echoed in the terminal
summary.  Two criteria (7 and 8) fail on purpose: their thresholds cannot be
met by the detector as specified, and the measured numbers are reported
instead of being hidden.
"""

from __future__ import annotations

import datetime as dt
import os
import time
from pathlib import Path

import numpy as np
import pytest

from acceptance_log import record
from conftest import THETA_A_SEARCH, THETA_FLAT_SEARCH, UK_POP, default_start, random_uk_theta, theta_from_search
from oracles import cusum_table, linear_decay
from pandemic_phases import (
    CusumParams,
    DynamicConfig,
    InitialStateSpec,
    IntegratorConfig,
    ModelParams,
    ObservedSeries,
    ParamBounds,
    SeidrState,
    SyntheticSpec,
    build_initial_state,
    detect_forward,
    dynamic_phase_detection,
    fit_parameters,
    generate_synthetic,
    integrate_forward,
    integrate_reverse,
    reproduction_rate,
    scenario_projection,
    vertical_adjustment,
)
from pandemic_phases.cli import main
from pandemic_phases.config import REFERENCE_THETA
from pandemic_phases.pipeline import carry_over
from pandemic_phases.report import read_json


def test_criterion_01_reproduction_rate():
    got = {c: reproduction_rate(ModelParams(**REFERENCE_THETA[c])) for c in ("United Kingdom", "US")}
    ok = abs(got["United Kingdom"] - 4.966) <= 0.001 and abs(got["US"] - 4.030) <= 0.001
    record(1, ok, f"R0 UK={got['United Kingdom']:.4f} (4.966), US={got['US']:.4f} (4.030), tol 0.001")
    assert ok


def test_criterion_02_conservation():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        theta = random_uk_theta(rng)
        x0 = SeidrState(*(rng.random(7) * [3e7, 3e7, 1e5, 1e5, 5e4, 1e3, 1e3]))
        traj = integrate_forward(theta, x0, 90)
        worst = max(worst, float(np.max(np.abs(traj.totals - x0.total)) / x0.total))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 5
    record(2, ok, f"worst relative drift {worst:.2e} over 100 runs (limit 1e-6), {elapsed:.2f} s")
    assert ok


def slow_theta(rng) -> ModelParams:
    # leapfrog's parasitic mode grows like exp(|lambda| t) on fast decays, so
    # unclamped 30-day runs need slow transition rates
    u = rng.random(9)
    removal = 0.01 + 0.04 * u[6]
    d = 0.05 * removal
    return ModelParams(beta=(2 + 3 * u[0]) * removal, c1=0.5 + 1.5 * u[1], c2=0.1 + 0.9 * u[2],
                       sigma=0.01 + 0.04 * u[3], m21=0.05 * u[4], n21=0.05 * u[5], d=d, r=removal - d,
                       alpha=0.08 + 0.12 * u[8])


def test_criterion_03_leapfrog_reversibility():
    rng = np.random.default_rng(2024)
    cfg = IntegratorConfig(scheme="leapfrog")
    t0 = time.perf_counter()
    errs, tried = [], 0
    while len(errs) < 20 and tried < 1000:
        tried += 1
        theta = slow_theta(rng)
        infected = rng.uniform(5e3, 5e4)
        x0 = default_start(6.7e7, infected, infected / 10)
        fwd = integrate_forward(theta, x0, 30, cfg)
        if fwd.clamped:
            continue
        back = integrate_reverse(theta, fwd.final, 30, cfg, lag=fwd.lag)
        errs.append(float(np.max(np.abs(back.final.as_array() - x0.as_array())) / x0.total))
    elapsed = time.perf_counter() - t0
    ok = len(errs) == 20 and max(errs) <= 1e-8 and elapsed < 2
    record(3, ok, f"{len(errs)} unclamped cases, worst {max(errs):.1e} (limit 1e-8), {elapsed:.2f} s")
    assert ok


LINEAR = ModelParams(beta=0, c1=1, c2=1, sigma=0, m21=0, n21=0, d=0.01, r=0.09, alpha=0.5)


def test_criterion_04_linear_oracle():
    want = np.array(linear_decay(1000.0, 0.01, 0.09, 10.0))
    errs = []
    for n in (20, 40):
        end = integrate_forward(LINEAR, SeidrState(s1=9000.0, i=1000.0), 10, IntegratorConfig(n)).final
        errs.append(float(np.max(np.abs(np.array([end.i, end.dd, end.rr]) - want) / want)))
    ok = errs[0] <= 0.005 and errs[1] <= 0.00125
    record(4, ok, f"relative error {errs[0]:.2e} (h=0.05, limit 5e-3), {errs[1]:.2e} (h=0.025, limit 1.25e-3)")
    assert ok


def test_criterion_05_fit_recovery():
    spec = InitialStateSpec(6.7e7)
    rng = np.random.default_rng(5)
    thetas = [theta_from_search(THETA_A_SEARCH)] + [random_uk_theta(rng) for _ in range(3)]
    fit_err = hold_err = 0.0
    for theta in thetas:
        obs = generate_synthetic(SyntheticSpec(((70, theta),), default_start()))
        fit = fit_parameters(obs, (0, 40), ParamBounds.uk(), spec)
        model = integrate_forward(fit.theta, fit.x0, 70).deaths
        rel = np.abs(model - obs.deaths) / obs.deaths
        fit_err = max(fit_err, float(rel[:41].max()))
        hold_err = max(hold_err, float(rel[41:].max()))
    ok = fit_err <= 0.02 and hold_err <= 0.05
    record(5, ok, f"{len(thetas)} targets, fit window max {fit_err:.1e} (2%), holdout days 41-70 max {hold_err:.1e} (5%)")
    assert ok


def test_criterion_06_cusum_tables():
    params = CusumParams(mu0=0.0, sigma0=1.0, k_ref=0.5, h=4.0)
    pos = detect_forward([2.0] * 10, params)
    neg = detect_forward([-2.0] * 10, params)
    oracle = cusum_table([2.0] * 10, 0.0, 0.5, 4.0)[2:]
    ok = (pos.t, pos.direction) == (3, "positive") == oracle and (neg.t, neg.direction) == (3, "negative")
    record(6, ok, f"positive table stops at {pos.t} ({pos.direction}), mirrored at {neg.t} ({neg.direction})")
    assert ok


def test_criterion_07_in_control_false_alarms():
    # The two-sided chart with K = 0.5 sd and h = 5 sd has an in-control ARL of about
    # 468 days, which puts roughly a third of 200-day streams over the threshold.
    t0 = time.perf_counter()
    fired = sum(
        detect_forward(np.random.default_rng(seed).normal(0.0, 1.0, 200), CusumParams.from_baseline(0.0, 1.0))
        is not None
        for seed in range(100)
    )
    elapsed = time.perf_counter() - t0
    ok = fired <= 5 and elapsed < 5
    record(7, ok, f"{fired}/100 streams fired (limit 5); theory with K=0.5sd, h=5sd gives about 34")
    assert ok


def test_criterion_08_synthetic_phase_recovery():
    theta = theta_from_search(THETA_A_SEARCH)
    tripled = theta.replace(c1=3 * theta.c1, c2=3 * theta.c2)
    phases = ((45, theta), (45, tripled))
    peak = float(np.diff(generate_synthetic(SyntheticSpec(phases, default_start())).deaths).max())
    obs = generate_synthetic(SyntheticSpec(phases, default_start(), noise_sd=0.02 * peak, seed=0))
    tl = dynamic_phase_detection(obs, DynamicConfig(spec=InitialStateSpec(6.7e7)))
    cps, refined = tl.change_points, tl.refined_change_points
    ok = (len(tl.phases) == 2 and 45 <= cps[0] <= 60
          and refined[0] is not None and 40 <= refined[0] <= 55)
    record(8, ok, f"{len(tl.phases)} phases, detections {cps}, refined {refined} "
                  f"(want 2 phases, T in [45,60], refined in [40,55]); noise sd {0.02 * peak:.2f}")
    assert ok


def test_criterion_09_vertical_adjustment():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(50):
        r = rng.uniform(1.0, 1e5, rng.integers(5, 60))
        p = r * rng.uniform(0.5, 5.0) + rng.normal(0, 100.0, len(r))
        v = vertical_adjustment(p, r)
        worst = max(worst, abs(float(np.dot(r, p - v * r))) / float(np.dot(r, np.abs(p))))
    exact = vertical_adjustment(2 * r, r)
    ok = worst <= 1e-9 and exact == 2.0
    record(9, ok, f"worst stationarity residual {worst:.1e} (limit 1e-9), p=2r gives v={exact!r}")
    assert ok


def _csse_dir() -> Path | None:
    for candidate in (os.environ.get("PANDEMIC_PHASES_CSSE_DIR"), Path(__file__).parent / "data" / "csse"):
        if candidate and (Path(candidate) / "time_series_covid19_deaths_global.csv").exists():
            return Path(candidate)
    return None


HISTORICAL = {
    "United Kingdom": ("2020-04-01", "2020-12-26", ["2020-07-31", "2020-09-11"]),
    "US": ("2020-04-11", "2020-12-29", ["2020-07-11", "2020-08-05", "2020-11-02"]),
}


def test_criterion_10_historical_anchor(tmp_path):
    data = _csse_dir()
    if data is None:
        record(10, None, "no CSSE files (set PANDEMIC_PHASES_CSSE_DIR or add tests/data/csse)")
        pytest.skip("historical CSSE data not available offline")
    notes, ok = [], True
    for country, (start, end, anchors) in HISTORICAL.items():
        out = tmp_path / f"{country}.json"
        assert main(["detect", "--data", str(data), "--country", country, "--start", start, "--end", end,
                     "-o", str(out)]) == 0
        found = [dt.date.fromisoformat(d) for d in read_json(out)["params"]["change_points"]]
        want = [dt.date.fromisoformat(d) for d in anchors]
        hit = len(found) == len(want) and all(abs((f - w).days) <= 14 for f, w in zip(found, want))
        ok &= hit
        notes.append(f"{country}: {[d.isoformat() for d in found]}")
    record(10, ok, "; ".join(notes) + " (soft, +-14 days)")
    assert ok


def test_criterion_11_scenario_monotonicity():
    # synthetic stand-in for the fitted UK series: a slowly growing regime seeded
    # with exposed cases in balance with the infected
    theta = theta_from_search(THETA_FLAT_SEARCH)
    spec = InitialStateSpec(UK_POP, exposed_ratio=(theta.d + theta.r) / theta.sigma, group1_fraction=1.0)
    seed = ObservedSeries(dt.date(2020, 9, 1), [5500.0], [500.0], [0.0], active=[5000.0])
    obs = generate_synthetic(SyntheticSpec(((60, theta),), build_initial_state(seed, 0, spec)))
    fit = fit_parameters(obs, (30, 60), ParamBounds.uk(), spec)
    icfg = IntegratorConfig()
    sset = scenario_projection(fit.theta, carry_over(fit, obs, 60, icfg), fit.v, [1, 2, 3, 4, 5, 6], 100, icfg)
    finals = [sset.final_deaths()[float(k)] for k in range(1, 7)]
    ratio = finals[5] / finals[3]
    ok = not sset.failures and all(a < b for a, b in zip(finals, finals[1:])) and ratio > 2
    record(11, ok, "100-day deaths x1..x6 " + ", ".join(f"{f:,.0f}" for f in finals)
           + f"; 6x/4x = {ratio:.2f} (want > 2), synthetic UK-like fixture")
    assert ok


def test_criterion_12_cli_determinism(tmp_path):
    series = tmp_path / "series.json"
    assert main(["simulate", "--days", "75", "--switch", "40", "--theta", "c1=0.6,c2=0.2", "--noise-sd", "3",
                 "--seed", "5", "-o", str(series)]) == 0
    runs = {
        "fit": ["fit", "--series", str(series), "--seed", "3"],
        "dynamic": ["dynamic", "--series", str(series), "--seed", "3"],
        "simulate": ["simulate", "--days", "60", "--noise-sd", "4", "--seed", "9"],
    }
    same = {}
    for name, argv in runs.items():
        blobs = []
        for k in range(2):
            out = tmp_path / f"{name}{k}.json"
            assert main(argv + ["-o", str(out)]) == 0
            blobs.append(out.read_bytes())
        same[name] = blobs[0] == blobs[1]
    ok = all(same.values())
    record(12, ok, ", ".join(f"{k} {'identical' if v else 'DIFFERENT'}" for k, v in same.items()))
    assert ok
