import pytest

_REPORT: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line; the lines are repeated in the terminal summary."""

    def _report(name: str, passed: bool, detail: str = "") -> bool:
        line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
        _REPORT.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)
