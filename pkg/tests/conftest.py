import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from freshsched.penalty import PenaltyCurve, dip_penalty, monotone_penalty

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def linear():
    return PenaltyCurve(np.arange(65, dtype=float))


@pytest.fixture
def dip():
    return dip_penalty()


@pytest.fixture
def monotone():
    return monotone_penalty()
