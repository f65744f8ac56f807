import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gdlab.catalog import load_builtin

settings.register_profile(
    "gdlab", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("gdlab")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def pd():
    return load_builtin("prisoners_dilemma")


@pytest.fixture(scope="session")
def bos():
    return load_builtin("battle_of_sexes")


@pytest.fixture(scope="session")
def mp():
    return load_builtin("matching_pennies")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
