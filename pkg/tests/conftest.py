import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from latentprobe import EmbeddingSet  # noqa: E402


@pytest.fixture
def line30():
    """30 points at integer positions 0..29 on a line, label = position mod 3."""
    x = np.arange(30, dtype=np.float64)[:, None]
    return EmbeddingSet(x, np.arange(30) % 3, name="line30")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    lines = test_acceptance.RESULTS
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
