import numpy as np
import pytest

from kahlerlab.fibermodel import ProjectiveValue, fixture
from kahlerlab.profiles import quadratic_profile
from kahlerlab.scalarfun import Interval


@pytest.fixture(scope="session")
def unit():
    return Interval(0.0, 1.0)


@pytest.fixture(scope="session")
def quad(unit):
    return quadratic_profile(unit, 1.0)


@pytest.fixture(scope="session")
def c_minus_one():
    return ProjectiveValue(-1.0, 1.0)


@pytest.fixture(scope="session")
def flat_const():
    return fixture("flat-const")


@pytest.fixture(scope="session")
def flat_var():
    return fixture("flat-var")


@pytest.fixture(scope="session")
def const_points(flat_const):
    return flat_const.sample(50, np.random.default_rng(11))


@pytest.fixture(scope="session")
def var_points(flat_var):
    return flat_var.sample(50, np.random.default_rng(12))


_CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """Record the verdict line for an acceptance criterion; returns the verdict for asserting."""

    def record(number: int, ok: bool, detail: str, label: str = "") -> bool:
        key = (number, label)
        _CRITERIA[key] = f"criterion {number:2d}{label}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[key])
