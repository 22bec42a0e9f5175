import os
from pathlib import Path

import networkx as nx
import numpy as np
import pytest

from sesample import build_graph

DATA_DIR = Path(os.environ.get("SESAMPLE_DATA", Path(__file__).resolve().parent.parent / "data"))
USAIR_PATH = DATA_DIR / "USAir.edges"


def nx_to_graph(nxg, features=None):
    return build_graph(np.array(list(nxg.edges()), dtype=np.int64), nxg.number_of_nodes(), features)


def er_graph(n, p, seed):
    return nx_to_graph(nx.gnp_random_graph(n, p, seed=seed))


def ba_graph(n, m, seed):
    return nx_to_graph(nx.barabasi_albert_graph(n, m, seed=seed))


@pytest.fixture
def path5():
    """Path 0-1-2-3-4."""
    return build_graph([(0, 1), (1, 2), (2, 3), (3, 4)], 5)


@pytest.fixture
def triangle():
    return build_graph([(0, 1), (0, 2), (1, 2)], 3)


@pytest.fixture
def four_node():
    """Edges {(0,1),(0,2),(1,2),(2,3)}; degrees [2,2,3,1]."""
    return build_graph([(0, 1), (0, 2), (1, 2), (2, 3)], 4)


@pytest.fixture
def k4():
    return build_graph([(i, j) for i in range(4) for j in range(i + 1, 4)], 4)


@pytest.fixture
def star5():
    """Center 0 with leaves 1..4."""
    return build_graph([(0, i) for i in range(1, 5)], 5)
