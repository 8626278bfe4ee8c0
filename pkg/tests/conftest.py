import numpy as np
import pytest

from rrergm import Graph, NodeAttributes

# One line per acceptance check, printed after the test summary so the
# verdicts survive pytest's output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance report")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260815)


@pytest.fixture
def toy_attrs():
    return NodeAttributes.from_dict(
        {
            "gender": ["M", "F", "M", "F", "F", "M"],
            "drug": ["yes", "no", "yes", "no", "yes", "no"],
            "sport": ["reg", "reg", "irr", "irr", "reg", "irr"],
            "seniority": [1.0, 2.0, 3.0, 1.5, 2.5, 0.5],
        }
    )


@pytest.fixture
def toy_graph():
    return Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5)])
