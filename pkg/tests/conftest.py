import csv
from pathlib import Path

import numpy as np
import pytest

from segrank.datasets import make_metric_cube
from segrank.records import METRICS, MetricRecord, MetricTable

DATA = Path(__file__).parent / "data"


def load_published():
    with open(DATA / "published_means.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def published_records(rows):
    """Each published mean as one single-case, single-label record."""
    cols = {"DSC": "dice_mean", "HD95": "hausdorff_mean", "VS": "vs_mean"}
    return [MetricRecord(r["team"], "all", 1, m, float(r[c])) for r in rows for m, c in cols.items()]


def table_from_cube(cube, teams=None):
    _, n_t, n_c, n_l = cube.shape
    teams = teams or [f"team{i:02d}" for i in range(n_t)]
    recs = [
        MetricRecord(teams[t], f"case{c:03d}", l + 1, m, float(cube[mi, t, c, l]))
        for mi, m in enumerate(METRICS)
        for t in range(n_t)
        for c in range(n_c)
        for l in range(n_l)
    ]
    return MetricTable.from_records(recs)


def synthetic_table(n_teams=5, n_cases=8, n_labels=3, seed=0):
    return table_from_cube(make_metric_cube(n_teams, n_cases, n_labels, seed))


@pytest.fixture(scope="session")
def published():
    return load_published()


@pytest.fixture
def small_table():
    return synthetic_table()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
