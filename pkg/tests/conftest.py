import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from jsum.jspace import JVector

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

P_VALUES = (1.0, 1.5, 2.0, 2.5, 3.0, math.inf)

# (criterion, passed, detail), filled in by test_acceptance.py
ACCEPTANCE_RESULTS = []


def random_jvector(rng, p, N=None, max_N=7, constant_tail=False, zero_prob=0.2):
    """Random JVector with entries x_n in R^n; some entries are zeroed."""
    if N is None:
        N = int(rng.integers(1, max_N + 1))
    entries = [()]
    for n in range(1, N + 1):
        v = rng.normal(size=n)
        if rng.random() < zero_prob:
            v[:] = 0.0
        entries.append(tuple(float(t) for t in v))
    return JVector(p, tuple(entries), constant_tail)


def random_subspace_basis(rng, k, n):
    while True:
        B = rng.normal(size=(k, n))
        if np.linalg.matrix_rank(B) == k:
            return B


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  {detail}")
