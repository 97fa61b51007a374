import sys
from pathlib import Path

import pytest

from bdtree import TreeSpec, validate

DATA = Path(__file__).parent / "data"


@pytest.fixture
def binary3():
    return validate({"tau": [1, 2], "N": [2, 2], "c": 0, "T": 3})


@pytest.fixture
def two_branch():
    return validate({"tau": [0.5], "N": [2], "c": 0, "T": 1})


@pytest.fixture
def one_branch():
    return TreeSpec((), (), c=0.5, T=1.0)


@pytest.fixture
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
