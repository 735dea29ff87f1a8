import numpy as np
import pytest

from attrshift.core import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_dataset():
    X = np.array([[0.0, 1.0], [1.5, -2.25], [3.0, 0.125]])
    return Dataset(X, [0, 1, 1], [0, 1, 0], num_classes=2, num_attributes=2, domain_tag="source")


_ACCEPTANCE = {}


@pytest.fixture
def acceptance(request):
    """Record ``(passed, detail)`` for an acceptance criterion; summarised at session end."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
