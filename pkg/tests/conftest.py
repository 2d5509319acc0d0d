from __future__ import annotations

import pytest

from oops.anchors import ONETWO_BOOSTS, boosted_pattern
from oops.interpreter import Machine

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def vm() -> Machine:
    return Machine()


@pytest.fixture
def onetwo_pattern(vm) -> list[int]:
    return boosted_pattern(vm, ONETWO_BOOSTS)
