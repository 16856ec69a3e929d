import numpy as np
import pytest

from pemskit import make_dataset
from pemskit.ingest import Dataset

# one line per acceptance criterion, printed after the run so the
# verdicts are visible even with pytest's output capture on
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def turbine_ds() -> Dataset:
    """Five synthetic years with mild drift; structure-rich fixture."""
    return make_dataset(rows_per_year=300, seed=11, drift=0.3)


@pytest.fixture(scope="session")
def iid_ds() -> Dataset:
    """Five synthetic years, identically distributed (drift 0)."""
    return make_dataset(rows_per_year=300, seed=5, drift=0.0)


@pytest.fixture()
def tiny_ds() -> Dataset:
    """Small two-year dataset with handmade columns."""
    rng = np.random.default_rng(3)
    n = 80
    cols = {
        "at": rng.normal(17, 7, n),
        "ap": rng.normal(1013, 6, n),
        "ah": rng.normal(77, 10, n),
        "afdp": rng.normal(4, 0.5, n),
        "tit": rng.normal(1086, 15, n),
        "tat": rng.normal(546, 6, n),
        "tep": rng.normal(25, 4, n),
        "tey": rng.normal(134, 14, n),
        "cdp": rng.normal(12, 1, n),
        "nox": rng.normal(65, 10, n),
    }
    year = np.repeat(np.array([2011, 2012], dtype=np.int64), n // 2)
    return Dataset(columns=cols, year=year, years=(2011, 2012))
