import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from pairdecomp import PointSet

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def uniform(n, d=2, seed=0):
    return PointSet(np.random.default_rng(seed).random((n, d)))


@st.composite
def point_sets(draw, min_n=2, max_n=40, dims=(1, 2, 3)):
    """Distinct points drawn from a small integer grid, then jittered."""
    d = draw(st.sampled_from(dims))
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    grid = rng.choice(64 ** min(d, 3), size=n, replace=False)
    cells = np.stack([(grid // 64 ** j) % 64 for j in range(d)], axis=1).astype(float)
    return PointSet(cells + 0.25 * rng.random((n, d)))


@pytest.fixture
def square():
    return PointSet([[0, 0], [1, 0], [0, 1], [1, 1]])


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
