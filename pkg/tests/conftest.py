import random

import numpy as np
import pytest

from tabletblas import TabletStore
from tabletblas.oracle import EdgeSet


def graph(pairs):
    return EdgeSet((str(u), str(v)) for u, v in pairs)


C3 = graph([(1, 2), (2, 3), (1, 3)])
P3 = graph([(1, 2), (2, 3)])
C4 = graph([(1, 2), (2, 3), (3, 4), (1, 4)])
K4 = graph([(i, j) for i in range(1, 5) for j in range(i + 1, 5)])


def random_graph(rng: random.Random, n: int, p: float) -> EdgeSet:
    width = len(str(n - 1))
    ids = [str(i).zfill(width) for i in range(n)]
    return EdgeSet((ids[i], ids[j]) for i in range(n) for j in range(i + 1, n)
                   if rng.random() < p)


def random_matrix(rng: np.random.Generator, rows: int, cols: int, density: float,
                  lo: int = -9, hi: int = 9, prefix=("r", "c")):
    """Triples of a random integer matrix with no explicit zeros."""
    rw, cw = len(str(rows - 1)), len(str(cols - 1))
    mask = rng.random((rows, cols)) < density
    vals = rng.integers(lo, hi + 1, size=(rows, cols))
    out = []
    for i, j in zip(*np.nonzero(mask & (vals != 0))):
        out.append((f"{prefix[0]}{str(i).zfill(rw)}", f"{prefix[1]}{str(j).zfill(cw)}",
                    int(vals[i, j])))
    return out


@pytest.fixture
def store():
    return TabletStore()


@pytest.fixture(params=[1, 2], ids=["one_tablet", "two_tablets"])
def tablets(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
