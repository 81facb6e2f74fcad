"""Collects the acceptance verdict lines and prints them after the run."""

import pytest

ACCEPTANCE = []


@pytest.fixture(scope="session")
def verdicts():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)
