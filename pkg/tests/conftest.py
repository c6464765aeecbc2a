import pytest

from rmsalab.topology import Topology, Link, load_topology, precompute_paths

TRIANGLE_TEXT = """\
nodes 3
link 0 0 1 100
link 1 1 2 100
link 2 0 2 100
"""


@pytest.fixture
def triangle():
    return Topology(3, [Link(0, 0, 1, 100.0), Link(1, 1, 2, 100.0),
                        Link(2, 0, 2, 100.0)], slot_count=100)


@pytest.fixture
def line():
    # 3 nodes in a row, 2 links, small grid for hand-checked block tests
    return Topology(3, [Link(0, 0, 1, 100.0), Link(1, 1, 2, 100.0)],
                    slot_count=10)


@pytest.fixture(scope="session")
def nsfnet():
    return load_topology("nsfnet")


@pytest.fixture(scope="session")
def nsfnet_paths(nsfnet):
    return precompute_paths(nsfnet, 5)
