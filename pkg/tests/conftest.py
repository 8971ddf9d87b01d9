import sys
from fractions import Fraction

import numpy as np
import pytest

from lcdmodem import ModemConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def modem():
    return ModemConfig((3000, 7800), Fraction(1, 10))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
