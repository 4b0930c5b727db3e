import numpy as np
import pytest

from permsums.rngkit import StreamSeed

# Lines collected by test_acceptance and echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def stream():
    return StreamSeed(20240611, 0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
