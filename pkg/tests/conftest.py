import time
from contextlib import contextmanager

import pytest

_ACCEPTANCE: list[tuple[str, str, float, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance criterion's outcome for the terminal summary."""

    @contextmanager
    def record(label):
        start = time.perf_counter()
        note = {"detail": ""}
        try:
            yield note
        except BaseException:
            _ACCEPTANCE.append((label, "FAIL", time.perf_counter() - start, note["detail"]))
            raise
        _ACCEPTANCE.append((label, "PASS", time.perf_counter() - start, note["detail"]))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, status, seconds, detail in _ACCEPTANCE:
        extra = f"  {detail}" if detail else ""
        terminalreporter.write_line(f"{status}  {label}  ({seconds:.2f} s){extra}")
