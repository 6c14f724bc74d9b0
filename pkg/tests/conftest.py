from pathlib import Path

import numpy as np
import pytest

from nalm.synthetic import SCENARIOS, generate

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def separable_days():
    return generate(SCENARIOS["separable"], 0)


@pytest.fixture(scope="session")
def benchmark_days():
    return generate(SCENARIOS["benchmark"], 0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
