import numpy as np
import pytest

from cloudward.topology import CloudGraph, TopologySpec, generate_topology


@pytest.fixture
def path5():
    return CloudGraph(n=5, edges=((0, 1), (1, 2), (2, 3), (3, 4)))


@pytest.fixture
def star10():
    return CloudGraph(n=10, edges=tuple((0, v) for v in range(1, 10)))


@pytest.fixture
def small_graph():
    """12-vertex two-subnet graph, fixed seed."""
    spec = TopologySpec(n=12, model="subnet-blocks", k=2, p_in=0.6, p_out=0.05)
    return generate_topology(spec, seed=17)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
