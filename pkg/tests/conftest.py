import math
import sys
from pathlib import Path

import numpy as np
import pytest

CORPUS = Path(__file__).parent / "corpus"
GOLDEN = Path(__file__).parent / "golden"

THETAS = [math.pi / 8, math.pi / 6, math.pi / 4]


@pytest.fixture
def rng():
    return np.random.default_rng(20070419)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
