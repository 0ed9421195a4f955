import numpy as np
import pytest

import reference as ref

# Filled by test_acceptance.py; one entry per criterion.
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for num, name, status in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(f"ACCEPTANCE {num} ({name}): {status}")


@pytest.fixture
def small_instance():
    """Deterministic n=6 random instance shared by several tests."""
    return ref.random_instance(6, seed=123)


@pytest.fixture
def tiny_graph_path(tmp_path):
    """A 7-node edge list with comments, a duplicate, and a self-loop,
    plus a 2-node component that largest_component must drop."""
    text = "\n".join([
        "# toy graph",
        "% alt comment",
        "1 2", "2 3", "1 3", "3 4", "4 5", "5 1",
        "2 3",      # duplicate
        "4 4",      # self-loop
        "10 11",    # separate small component
        "",
    ])
    path = tmp_path / "toy.txt"
    path.write_text(text)
    return str(path)
