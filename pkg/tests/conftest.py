import math

import pytest

from hypwalk.spaces import FreeGroupTree, FuchsianHalfPlane, schottky_pair


@pytest.fixture(scope="session")
def tree():
    return FreeGroupTree(2)


@pytest.fixture(scope="session")
def schottky():
    # delta = log 3 is the ideal-triangle constant of H^2; fixing it skips the estimate
    return FuchsianHalfPlane(schottky_pair(4.0), delta=math.log(3))


ACCEPTANCE = pytest.StashKey[list]()


def record_line(config, line):
    print(line)
    config.stash.setdefault(ACCEPTANCE, []).append(line)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
