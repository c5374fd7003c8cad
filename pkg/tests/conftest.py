import pytest

_LINES: list[str] = []


@pytest.fixture
def criterion_report():
    """Append a line to the acceptance summary printed at the end of the run."""

    def report(line: str) -> None:
        _LINES.append(line)
        print(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
