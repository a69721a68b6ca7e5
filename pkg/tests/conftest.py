import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

# acceptance criteria report: (criterion id, passed, detail)
ACCEPTANCE_RESULTS = []


def random_labels(rng, n):
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    return rng.permutation(y)


def random_histograms(rng, n, D, zero_frac=0.0):
    X = rng.gamma(2.0, 1.0, size=(n, D))
    if zero_frac:
        X[rng.random(X.shape) < zero_frac] = 0.0
    return X


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid, ok, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {cid}  {detail}")
