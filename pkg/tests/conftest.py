import contextlib
import time

import pytest

_RESULTS: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Context manager recording one pass/fail line per acceptance criterion."""

    @contextlib.contextmanager
    def run(number: int, title: str):
        start = time.perf_counter()
        details: list[str] = []
        status = "FAIL"
        try:
            yield details
            status = "PASS"
        finally:
            elapsed = time.perf_counter() - start
            extra = f" ({'; '.join(details)})" if details else ""
            line = f"criterion {number} {status}: {title} [{elapsed:.1f}s]{extra}"
            _RESULTS[number] = line
            print(line)

    return run


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_RESULTS):
            terminalreporter.write_line(_RESULTS[number])
