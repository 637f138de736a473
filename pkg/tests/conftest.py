import numpy as np
import pytest
from hypothesis import settings

from ptes.design import reference_design
from ptes.io import bundled_prices

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def design():
    return reference_design()


@pytest.fixture(scope="session")
def prices168():
    return bundled_prices()


def sine_prices(hours, seed=1):
    rng = np.random.default_rng(seed)
    t = np.arange(hours)
    return 40 + 15 * np.sin(2 * np.pi * t / 24) + 10 * np.sin(2 * np.pi * t / 168) + rng.normal(0, 4, hours)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
