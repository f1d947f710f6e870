import numpy as np
import pytest

from monodsm.catalog import catalog, get_operator
from monodsm.hilbert import OperatorInstance, OperatorSpec


@pytest.fixture
def nonmonotone():
    """B(u) = -u; exists only to prove the probe and checks see violations."""
    return OperatorInstance(OperatorSpec("linear", matrix=[[-1.0]], enforce_monotone=False), 1)


@pytest.fixture
def affine1d():
    return get_operator("affine-1d")


@pytest.fixture
def singular2d():
    return get_operator("singular-2d")


def pytest_report_header(config):
    return f"catalog entries: {', '.join(catalog(include_test_only=True))}"


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance_log(request):
    """Record one line per acceptance criterion; printed in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})

    def log(number, ok, message):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {message}"
        lines[number] = line
        print(line)
        return ok

    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
