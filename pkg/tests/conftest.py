import warnings

import pytest

from halfkdv.solver import TruncationWarning

ACCEPTANCE_LINES: dict = {}


@pytest.fixture(autouse=True)
def _quiet_truncation():
    # full-line runs shed dispersive radiation toward the far end
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        yield


@pytest.fixture
def criterion():
    """``criterion(n, ok, detail)`` prints and records one verdict line."""
    def report(n: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}"
        ACCEPTANCE_LINES[n] = line
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
