import numpy as np
import pytest

from magnet.graph_core import AdjacencyMatrix
from magnet.synth import GraphDataset


def random_connected_graph(rng, n_nodes, p_edge=0.35):
    """Random graph with a spanning path so no node is isolated."""
    perm = rng.permutation(n_nodes)
    pairs = {tuple(sorted((int(perm[k]), int(perm[k + 1])))) for k in range(n_nodes - 1)}
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if rng.random() < p_edge:
                pairs.add((i, j))
    return AdjacencyMatrix.from_edges(n_nodes, pairs)


def planted_separable(rng, n=80, n_nodes=10, feat_dim=4, margin=0.5):
    """Features shifted by +-margin according to the label, plus small noise."""
    adj = random_connected_graph(rng, n_nodes)
    labels = np.where(np.arange(n) % 2 == 0, 1, -1)
    x = rng.normal(0.0, 0.1, size=(n, n_nodes, feat_dim)) + margin * labels[:, None, None]
    return GraphDataset(adj, x, labels, np.arange(n_nodes // 2))


def planted_edge_dataset(seed=3, n=120):
    """Leaf node 0 hangs off a 7-cycle; only node 0's first feature drives the label."""
    rng = np.random.default_rng(seed)
    n_nodes = 8
    edges = [(0, 1)] + [(i, i % 7 + 1) for i in range(1, 8)]
    adj = AdjacencyMatrix.from_edges(n_nodes, edges)
    x = np.zeros((n, n_nodes, 2))
    x[:, 0, 0] = rng.normal(size=n)
    x[:, :, 1] = rng.normal(size=(n, n_nodes))
    labels = np.where(x[:, 0, 0] > 0, 1, -1)
    return GraphDataset(adj, x, labels, np.array([0]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
