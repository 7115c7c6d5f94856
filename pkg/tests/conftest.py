import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=200, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("default")


def random_sparse_spd(n, rng, kind="random", density=0.05, bandwidth=3):
    """Sparse SPD matrix with a banded or random pattern (diagonally dominant)."""
    if kind == "banded":
        A = np.zeros((n, n))
        for k in range(1, min(bandwidth, n - 1) + 1):
            v = rng.uniform(-1, 1, n - k)
            A += np.diag(v, k) + np.diag(v, -k)
    else:
        M = rng.uniform(-1, 1, (n, n)) * (rng.uniform(size=(n, n)) < density)
        A = np.tril(M, -1)
        A = A + A.T
    A += np.diag(np.abs(A).sum(axis=1) + rng.uniform(0.5, 1.5, n))
    return A


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


_CRITERIA = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marks = dict(report.user_properties)
    if "criterion" in marks:
        _CRITERIA.append((marks["criterion"], report.outcome, marks.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), outcome, detail in sorted(_CRITERIA):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number} {verdict}: {title}. {detail}".rstrip())
