import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def even_defect_sets(draw, max_pairs=4, max_width=30):
    """Sorted defect sets of even size on the line, starting at 0."""
    m = draw(st.integers(1, max_pairs))
    width = draw(st.integers(2 * m - 1, max(2 * m - 1, max_width)))
    inner = draw(st.lists(st.integers(1, width - 1), min_size=2 * m - 2, max_size=2 * m - 2, unique=True)) if m > 1 else []
    return sorted([0, width, *inner])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
