import numpy as np
import pytest

from excursions import CadlagPath


def random_step_path(rng, max_breaks=8, dyadic=True, p_anchor=0.35, dim=1):
    """Step path on dyadic times whose values sit on the anchor with some probability."""
    k = int(rng.integers(1, max_breaks + 1))
    gaps = rng.integers(1, 9, size=k - 1) / 8.0 if dyadic else rng.uniform(0.05, 1.0, k - 1)
    times = np.concatenate(([0.0], np.cumsum(gaps)))
    vals = rng.integers(-3, 4, size=(k, dim)).astype(float)
    vals[rng.random(k) < p_anchor] = 0.0
    # keep breakpoints canonical: consecutive rows differ
    keep = np.ones(k, bool)
    keep[1:] = np.any(vals[1:] != vals[:-1], axis=1)
    return CadlagPath(times[keep], vals[keep])


@pytest.fixture
def two_exc():
    return CadlagPath.from_steps([(0, 0), (1, 1), (2, 0), (3, -1), (3.5, 0)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_subdivision(rng, top=6.0):
    """Subdivision on the eighth-grid, repeats allowed, sometimes with an odd cardinality."""
    from excursions import Subdivision
    k = int(rng.integers(0, 7))
    entries = np.sort(rng.integers(0, int(top * 8) + 1, size=k)) / 8.0
    return Subdivision([0.0, *entries])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
