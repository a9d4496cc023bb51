"""Shared pytest plumbing.

The acceptance suite records one verdict line per criterion; they are
echoed in the terminal summary so every run prints the full scoreboard
regardless of output capturing.
"""

import pytest

acceptance_report: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return acceptance_report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_report:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_report:
            terminalreporter.write_line(line)
