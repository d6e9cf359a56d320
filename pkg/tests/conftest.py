import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tractor.catalog import get_chart

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def flat():
    return get_chart("flat")


@pytest.fixture(scope="session")
def sphere():
    return get_chart("sphere_round")


@pytest.fixture(scope="session")
def perturbed():
    return get_chart("perturbed_flat", {"eps": 0.01, "seed": 7})


@pytest.fixture(scope="session")
def heisenberg():
    return get_chart("heisenberg_fefferman")


@pytest.fixture(scope="session")
def berger():
    return get_chart("berger_fefferman", {"lam": 1.2})


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
