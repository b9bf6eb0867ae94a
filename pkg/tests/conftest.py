import math

import pytest

from noisyswap.config import TIMEBIN_CONFIG, parse_config_text
from noisyswap.detectors import DetectorSpec
from noisyswap.inference import DetectorBank

TIMEBIN_CHI = math.sqrt(0.06)


@pytest.fixture(scope="session")
def timebin_config():
    return parse_config_text(TIMEBIN_CONFIG)


@pytest.fixture(scope="session")
def timebin_bell_bank():
    return DetectorBank.from_lists([0.045, 0.045, 0.135, 0.135], [3e-5, 3e-5, 1e-5, 1e-5])


@pytest.fixture(scope="session")
def ideal_bank():
    return DetectorBank.uniform(1.0, 0.0)


def spec_grid():
    """5 x 5 grid of (eta, p_dc) used by the oracle comparisons."""
    etas = [0.02, 0.1, 0.35, 0.7, 0.95]
    pdcs = [0.0, 1e-6, 1e-5, 1e-3, 0.02]
    return [DetectorSpec(e, p) for e in etas for p in pdcs]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
