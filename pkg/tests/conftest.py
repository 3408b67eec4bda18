import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from transientshift.models import (  # noqa: E402
    biased_walk_z,
    example1,
    example2,
    inward_drift_walk,
    regular_tree,
    self_loop,
)


@pytest.fixture(scope="session")
def ex1():
    return example1(-1.0)


@pytest.fixture(scope="session")
def ex2():
    return example2()


@pytest.fixture(scope="session")
def zwalk():
    return biased_walk_z(2 / 3)


@pytest.fixture(scope="session")
def tree():
    return regular_tree(3)


@pytest.fixture(scope="session")
def inward():
    return inward_drift_walk(0.7)


@pytest.fixture(scope="session")
def loop():
    return self_loop(-1.0)
