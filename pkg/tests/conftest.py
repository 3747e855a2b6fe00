import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brute_knn(x, k):
    """O(N^2) scan with (distance, index) ordering."""
    d = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
    n = len(x)
    idx = np.empty((n, k), dtype=int)
    for i in range(n):
        cand = [(d[i, j], j) for j in range(n) if j != i]
        cand.sort()
        idx[i] = [j for _, j in cand[:k]]
    return idx, np.take_along_axis(d, idx, axis=1)


# one PASS/FAIL line per acceptance criterion, printed at the end of the run
_ACCEPTANCE = {}


def pytest_runtest_makereport(item, call):
    if item.module.__name__.endswith("test_acceptance") and call.when == "call":
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        _ACCEPTANCE[item.name] = ("PASS" if call.excinfo is None else "FAIL", doc)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        status, doc = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{status}  {doc}")
