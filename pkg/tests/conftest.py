import numpy as np
import pytest

ACCEPTANCE_LINES = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def record():
    """Store a one-line acceptance verdict: ``record(number, ok, detail)``."""

    def _record(number, ok, detail):
        ACCEPTANCE_LINES[number] = (bool(ok), detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        ok, detail = ACCEPTANCE_LINES[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
