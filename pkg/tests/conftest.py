import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("repo", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@st.composite
def pmfs(draw, k=None, floor=1e-3):
    """Strictly positive pmf of size k (drawn in 2..5 when not given)."""
    k = k or draw(st.integers(2, 5))
    w = draw(st.lists(st.floats(floor, 1.0), min_size=k, max_size=k))
    p = np.array(w) / sum(w)
    p[-1] = 1.0 - p[:-1].sum()
    return p


@st.composite
def binary_rows(draw, k=None):
    """Two distinct positive rows over a common alphabet."""
    k = k or draw(st.integers(2, 5))
    r0 = draw(pmfs(k))
    r1 = draw(pmfs(k))
    from hypothesis import assume

    assume(np.abs(r0 - r1).max() > 1e-3)
    return r0, r1


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
