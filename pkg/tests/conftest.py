import pytest

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def record():
    """Store one verdict line per acceptance criterion and echo it."""

    def _record(number: int, passed: bool, text: str) -> str:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {text}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return line

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
