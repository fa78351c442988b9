from pathlib import Path

import pytest

from npplab.core import Instance

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def g1234():
    return Instance.from_ints((1, 2, 3, 4))


@pytest.fixture
def g45678():
    return Instance.from_ints((4, 5, 6, 7, 8))


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda l: int(l.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
