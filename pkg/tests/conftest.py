"""Shared fixtures: collects acceptance-criterion verdicts for the run summary."""
import pytest

_criterion_lines: list[str] = []


@pytest.fixture(scope="session")
def criterion_report():
    """Callable that records one 'criterion N: PASS/FAIL' line for the summary."""

    def record(line: str) -> None:
        _criterion_lines.append(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)
