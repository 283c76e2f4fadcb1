import sys
from pathlib import Path

import pytest

from kimmse.inputs import GaussianInput, standard_constellation
from kimmse.model import SystemModel, UserLink

sys.path.insert(0, str(Path(__file__).parent))


def scalar_system(gains, name="bpsk", precoders=None):
    law = standard_constellation(name, 1)
    precoders = precoders or [1.0] * len(gains)
    return SystemModel([UserLink([[g]], [[p]], law) for g, p in zip(gains, precoders)], 1)


def gaussian_scalar_system(gains):
    return SystemModel([UserLink([[g]], [[1.0]], GaussianInput(1)) for g in gains], 1)


@pytest.fixture
def k2_bpsk():
    return scalar_system([1.0, 0.8])


@pytest.fixture
def k1_bpsk():
    return scalar_system([1.0])


# One summary line per acceptance criterion, printed after the run.
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
