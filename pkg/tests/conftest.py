from itertools import combinations_with_replacement

import numpy as np
import pytest

from lcsfluct.partition import Partition


def all_partitions(n, m):
    for inner in combinations_with_replacement(range(n + 1), m - 1):
        yield Partition((0, *inner, n))


@pytest.fixture
def rng():
    return np.random.default_rng(20260101)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
