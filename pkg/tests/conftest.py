import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).parent
DATA = TESTS / "data"
sys.path.insert(0, str(TESTS))

from chorex.syntax import parse_choreography, parse_network  # noqa: E402


def load_net(name: str):
    return parse_network((DATA / name).read_text(), name)


def load_chor(name: str):
    return parse_choreography((DATA / name).read_text(), name)


@pytest.fixture
def onlinestore():
    return load_net("onlinestore.net")


@pytest.fixture
def serverless():
    return load_net("serverless.net")


# one line per acceptance criterion, shown after the run whatever the capture mode
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
