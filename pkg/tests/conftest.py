import numpy as np
import pytest

from aesn.data import synth_generate, to_log_thousands
from aesn.graph import from_edge_list

#: Lines recorded by the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_graph(rng, n_s, p=0.3, connected=False):
    """Erdos-Renyi edges; ``connected=True`` adds a random spanning tree first."""
    edges = set()
    if connected:
        order = rng.permutation(n_s)
        for i in range(1, n_s):
            j = order[rng.integers(0, i)]
            edges.add((min(order[i], j), max(order[i], j)))
    for i in range(n_s):
        for j in range(i + 1, n_s):
            if rng.random() < p:
                edges.add((i, j))
    return from_edge_list(sorted(edges), n_s)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_synth():
    """Raw and log-scale panels on a 3x2 lattice, 48 months."""
    raw, g = synth_generate(3, 2, 48, seed=3)
    return raw, to_log_thousands(raw), g
