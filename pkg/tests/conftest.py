import math

import numpy as np
import pytest

from bathsim.discretize import sample_modes
from bathsim.spectrum import QuadratureSpec, gaussian_gap, gaussian_gapless

# Closed forms and mpmath (50 digits) values for the gap fixture nu0 = 1, c = 1.
K_GAP = 3 * math.erfc(1.0) - 2 * math.exp(-1.0) / math.sqrt(math.pi)
W_DIAMOND_HALF = 0.065334866095161295726632723093
W_DIAMOND_EDGE = math.erfc(1.0)
LAMBDA0_SYNC = 0.653084885046604573041816974667  # v = 0.5


@pytest.fixture(scope="session")
def quad():
    return QuadratureSpec()


@pytest.fixture(scope="session")
def gapless():
    return gaussian_gapless()


@pytest.fixture(scope="session")
def gap():
    return gaussian_gap()


@pytest.fixture(scope="session")
def gapless_bath(gapless, quad):
    return sample_modes(gapless, quad, 512)


@pytest.fixture(scope="session")
def small_bath(gapless, quad):
    return sample_modes(gapless, quad, 8, order=4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
