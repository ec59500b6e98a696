import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from feynman_dirichlet import CutoffFamily, EllipticOperator, Interval, TestFunction

settings.register_profile(
    "numeric", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("numeric")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def half_period():
    return Interval(0.0, np.pi)


@pytest.fixture
def heat():
    return EllipticOperator.constant(1.0)


@pytest.fixture
def sine():
    return TestFunction.sine_series([1.0])


@pytest.fixture
def cutoff():
    return CutoffFamily()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
