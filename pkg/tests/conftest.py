import itertools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from eccnbench.graphs import Graph  # noqa: E402

# reference graphs with known ECCN (3 and 5), given with 1-indexed vertex labels
K5_WITH_TAIL_EDGES = list(itertools.combinations(range(1, 6), 2)) + [(1, 6), (5, 6), (5, 7)]
DIE_MISSING = {(1, 7), (2, 8), (3, 5), (4, 6)}


def k5_with_tail() -> Graph:
    return Graph.from_edges(7, [(a - 1, b - 1) for a, b in K5_WITH_TAIL_EDGES])


def die_graph() -> Graph:
    pairs = [p for p in itertools.combinations(range(1, 9), 2) if p not in DIE_MISSING]
    return Graph.from_edges(8, [(a - 1, b - 1) for a, b in pairs])


def edge_set(g: Graph) -> set:
    return {frozenset(e) for e in g.edges}


@pytest.fixture
def left_graph():
    return k5_with_tail()


@pytest.fixture
def die():
    return die_graph()


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
