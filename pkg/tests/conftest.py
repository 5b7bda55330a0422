import pytest

import etconsensus as ec


@pytest.fixture
def ring3():
    return ec.build_digraph(3, [(1, 2, 1.0), (2, 3, 1.0), (3, 1, 1.0)])


@pytest.fixture
def chain3():
    return ec.build_digraph(3, [(1, 2, 1.0), (2, 3, 1.0)])


@pytest.fixture
def five_node():
    edges = [(1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 5, 1.0), (5, 1, 1.0),
             (1, 3, 1.0), (4, 2, 1.0)]
    return ec.build_digraph(5, edges)


@pytest.fixture
def gain06():
    return ec.make_gain(1.0, 0.6)
