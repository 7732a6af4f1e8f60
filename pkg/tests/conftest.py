from pathlib import Path

import numpy as np
import pytest

from rlcombo.panel import ForecastPanel

FIXTURES = Path(__file__).parent / "fixtures"


def random_panel(rng, T=None, n=None, p_missing=0.0, series_id="rand"):
    T = T or int(rng.integers(12, 60))
    n = n or int(rng.integers(2, 6))
    y = np.cumsum(rng.normal(size=T)) + 10
    fc = y[:, None] + rng.normal(scale=rng.uniform(0.2, 2.0, n), size=(T, n))
    avail = rng.random((T, n)) >= p_missing
    avail[np.arange(T), rng.integers(0, n, T)] = True
    return ForecastPanel(series_id, y, fc, avail, tuple(f"m{i + 1}" for i in range(n)))


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def rng():
    return np.random.default_rng(20240224)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(label, passed, detail)``."""

    def record(label, passed, detail=""):
        line = f"{'PASS' if passed else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
