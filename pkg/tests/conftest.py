import numpy as np
import pytest

from hyvascore.models import DataSet


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def gaussian_data(rng):
    """Intercept-only standard normal sample, n = 200."""
    return DataSet(rng.normal(size=200))


@pytest.fixture
def regression_data(rng):
    n = 150
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    y = X @ np.array([0.5, 1.0, -0.5]) + rng.normal(scale=0.8, size=n)
    return DataSet(y, X)


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
