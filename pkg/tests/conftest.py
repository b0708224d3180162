import pytest

from tstsim import fixtures

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def canonical():
    return fixtures.canonical()


@pytest.fixture
def parametric():
    return fixtures.parametric()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
