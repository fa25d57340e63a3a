import numpy as np
import pytest

from clalign.phantom import random_phantom
from clalign.projector import candidate_set

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cands():
    return candidate_set()


@pytest.fixture(scope="session")
def phantom64():
    return random_phantom(64, 11)


@pytest.fixture(scope="session")
def vol64(phantom64):
    return phantom64.render(64)

