import numpy as np
import pytest

from spinfactory.geometry import Angles

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_angles(rng, n):
    v = rng.normal(size=(n, 3))
    return [Angles.from_direction(x) for x in v]
