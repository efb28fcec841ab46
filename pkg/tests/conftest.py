import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sagtrack.hand import default_hand_model  # noqa: E402
from sagtrack.synth import default_rig  # noqa: E402


@pytest.fixture(scope="session")
def hand():
    return default_hand_model()


@pytest.fixture(scope="session")
def rig():
    return default_rig()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
