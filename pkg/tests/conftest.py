"""Shared test plumbing: the acceptance verdict report.

Acceptance tests record one line per criterion; the hook below replays
them in the terminal summary so the verdicts are visible even when output
capturing hides in-test prints.
"""

import pytest

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log() -> list[str]:
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
