"""Shared fixtures and the acceptance-criterion reporting hook.

Acceptance tests register a one-line verdict through ``record_criterion``;
``pytest_terminal_summary`` then prints one PASS/FAIL line per criterion so
the outcome of the acceptance suite is visible even under captured output.
"""

from __future__ import annotations

import numpy as np
import pytest

from hclimits import FutureDesign, HistoricalData, mortality_hcd

_CRITERIA: dict[int, tuple[str, str]] = {}

_DESCRIPTIONS = {
    1: "deterministic golden limits and dispersion estimates",
    2: "calibrated bootstrap limits across seeds",
    3: "Bayesian covered ranges with convergence gate",
    4: "calibrated-interval coverage near nominal",
    5: "heuristic limits mis-cover where expected",
    6: "calibration balances tail errors better than mean-sd",
    7: "quasi-binomial and beta-binomial widths agree at matched dispersion",
    8: "sampler dispersion conversion and moment oracle",
    9: "bisection matches grid-scan calibration",
    10: "Gibbs conditional matches analytic beta moments",
}


def record_criterion(number: int, status: str, detail: str = "") -> None:
    """Store the verdict for one acceptance criterion."""
    _CRITERIA[number] = (status, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_DESCRIPTIONS):
        status, detail = _CRITERIA.get(number, ("NOT RUN", ""))
        line = f"criterion {number:02d} {status:<8s} {_DESCRIPTIONS[number]}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def mortality() -> HistoricalData:
    return mortality_hcd()


@pytest.fixture(scope="session")
def design() -> FutureDesign:
    return FutureDesign(n_star=50)


@pytest.fixture()
def small_hcd() -> HistoricalData:
    return HistoricalData(studies=((3.0, 40.0), (5.0, 40.0), (2.0, 40.0), (6.0, 40.0)))


@pytest.fixture(scope="session")
def rng_seeds() -> np.ndarray:
    return np.arange(5)
