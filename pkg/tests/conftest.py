import numpy as np
import pytest

from blocksense.core import RngHandle


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def handle():
    return RngHandle(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
