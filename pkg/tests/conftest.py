import math

import numpy as np
import pytest

from qmpsim.hilbert import Ket, qubit

SQRT2 = math.sqrt(2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def i_state():
    """Worked-example preselection (0.6, 0.8)."""
    return qubit(0.6, 0.8)


@pytest.fixture
def f_plus():
    return qubit(1 / SQRT2, 1 / SQRT2)


def ket(*amps):
    return Ket(list(amps))


# acceptance criteria report lines, filled by test_acceptance.py
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[1:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
