from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pandemic_phases import InitialStateSpec, ModelParams, ParamBounds, SeidrState  # noqa: E402
from pandemic_phases.fitting import from_search  # noqa: E402

UK_POP = 67_886_004.0

# a UK-box parameter vector in search coordinates (R0, c1, c2, sigma, m21, n21, d, r, alpha)
THETA_A_SEARCH = (4.914, 0.623, 0.242, 0.035, 0.366, 0.474, 0.017, 0.34, 0.143)
# a slowly varying UK-box regime used for the scenario fixture
THETA_FLAT_SEARCH = (4.802, 0.551, 0.115, 0.022, 0.637, 0.783, 0.017, 0.362, 0.112)


def theta_from_search(z) -> ModelParams:
    return ModelParams.from_array(from_search(np.asarray(z, dtype=float)))


def default_start(population: float = 6.7e7, infected: float = 20000.0, deaths: float = 2000.0) -> SeidrState:
    """State matching ``InitialStateSpec(population)`` for ``infected`` active cases."""
    s = population - 3 * infected - deaths
    return SeidrState(s / 2, s / 2, infected, infected, infected, deaths, 0.0)


def random_uk_theta(rng) -> ModelParams:
    b = ParamBounds.uk()
    return theta_from_search(b.lo + (b.hi - b.lo) * rng.random(9))


@pytest.fixture
def theta_a() -> ModelParams:
    return theta_from_search(THETA_A_SEARCH)


@pytest.fixture
def start_state() -> SeidrState:
    return default_start()


@pytest.fixture
def spec() -> InitialStateSpec:
    return InitialStateSpec(6.7e7)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        status, detail = RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {detail}")
