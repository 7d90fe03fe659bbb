import math

import numpy as np
import pytest

from cbf_lab.experiments import REGISTRY


@pytest.fixture(params=sorted(REGISTRY))
def figure(request):
    return REGISTRY[request.param]


@pytest.fixture
def fig1a():
    return REGISTRY["fig1a"].scenario()


@pytest.fixture
def fig1b():
    return REGISTRY["fig1b"].scenario()


@pytest.fixture
def fig1c():
    return REGISTRY["fig1c"].scenario()


@pytest.fixture
def fig1d():
    return REGISTRY["fig1d"].scenario()


SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)


def assert_close(a, b, tol):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    assert np.max(np.abs(a - b)) <= tol, f"{a} vs {b}"


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record ``(number, passed, detail)`` for the acceptance summary."""

    def record(number: int, passed: bool, detail: str = "") -> bool:
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, 11):
        passed, detail = ACCEPTANCE.get(number, (False, "not run or errored"))
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
