import numpy as np
import pytest

from multireduce import synth
from multireduce.reducers import MulticlassSample

_ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = {}


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion, then assert it."""
    table = request.config.stash[_ACCEPTANCE_KEY]

    def report(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        table[number] = line
        print(line)
        assert passed, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(_ACCEPTANCE_KEY, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(table):
        terminalreporter.write_line(table[number])


@pytest.fixture
def circle9():
    return synth.circle_points(9)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def blobs():
    """Factory for well-separated Gaussian blobs around the unit circle."""
    def make(k=3, n=60, seed=0, spread=0.05):
        rng = np.random.default_rng(seed)
        ang = 2 * np.pi * np.arange(k) / k
        centers = np.column_stack([np.cos(ang), np.sin(ang)])
        y = rng.integers(1, k + 1, size=n)
        X = centers[y - 1] + spread * rng.standard_normal((n, 2))
        return MulticlassSample(X, y, k)
    return make
