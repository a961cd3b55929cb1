import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from osegments.intervals import IntervalSet

settings.register_profile(
    "repo", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("repo")

GRID = 64


@st.composite
def grid_sets(draw, grid: int = GRID, max_parts: int = 5):
    """Interval sets with endpoints on ``k / grid`` and random endpoint flags."""
    cuts = draw(st.lists(st.integers(0, grid), min_size=0, max_size=2 * max_parts, unique=True))
    cuts = sorted(cuts)
    if len(cuts) % 2:
        cuts = cuts[:-1]
    pairs = list(zip(cuts[0::2], cuts[1::2]))
    flags = draw(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=len(pairs), max_size=len(pairs)))
    lo = np.array([a / grid for a, _ in pairs], float)
    hi = np.array([b / grid for _, b in pairs], float)
    lo_open = np.array([f[0] for f in flags], bool)
    hi_open = np.array([f[1] for f in flags], bool)
    return IntervalSet(lo, hi, lo_open, hi_open)


def cells(E: IntervalSet, grid: int = GRID) -> np.ndarray:
    """Membership of the midpoints of the ``1/grid`` cells (an exact oracle for grid sets)."""
    mids = (np.arange(grid) + 0.5) / grid
    return np.array([E.contains_point(x) for x in mids])


def random_open_set(rng: np.random.Generator, k_max: int = 6, lo: float = 0.0, hi: float = 1.0) -> IntervalSet:
    k = int(rng.integers(1, k_max + 1))
    pts = np.sort(rng.uniform(lo, hi, 2 * k))
    return IntervalSet.from_pairs(list(zip(pts[0::2], pts[1::2])), open=True)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line per acceptance criterion; the lines are repeated in the summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def _report(criterion: int, ok: bool, detail: str) -> bool:
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
