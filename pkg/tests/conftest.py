import time

import pytest

_LINES: list[str] = []


class Criterion:
    """Records one acceptance criterion as a PASS/FAIL line, then asserts."""

    def __init__(self):
        self.start = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    def report(self, number: int, title: str, passed: bool, detail: str, limit_s: float | None = None):
        took = self.elapsed()
        if limit_s is not None and took >= limit_s:
            passed = False
            detail += f"; runtime {took:.1f}s exceeds {limit_s:.0f}s"
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2} {title}: {detail} [{took:.1f}s]"
        _LINES.append(line)
        print(line)
        assert passed, line


@pytest.fixture
def criterion():
    return Criterion()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
