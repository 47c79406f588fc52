import pytest

_LINES: dict = {}


@pytest.fixture
def criterion_log():
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def log(num: int, passed: bool, text: str):
        line = f"{'PASS' if passed else 'FAIL'} criterion {num}: {text}"
        _LINES[num] = line
        print(line)
        return line

    return log


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_LINES):
        terminalreporter.write_line(_LINES[k])
