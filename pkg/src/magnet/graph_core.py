"""Graph containers and normalized Laplacian operators.

Adjacency is stored as a sorted upper-triangle edge list; the Laplacian is a
``scipy.sparse`` CSR matrix built symmetrically so that ``L[i, j]`` and
``L[j, i]`` are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, InvalidParams, IsolatedNode


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Undirected, unweighted, loop-free graph on ``n_nodes`` nodes.

    ``edges`` is an ``(E, 2)`` integer array of pairs ``i < j`` in
    lexicographic order. Use :meth:`from_edges` to build one from arbitrary
    pair lists.
    """

    n_nodes: int
    edges: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.n_nodes < 2:
            raise InvalidParams("n_nodes must be >= 2")
        if len(edges):
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise InvalidParams("edges must satisfy i < j (no loops)")
            if edges.min() < 0 or edges.max() >= self.n_nodes:
                raise InvalidParams("edge endpoint out of range")
            keys = edges[:, 0] * self.n_nodes + edges[:, 1]
            if np.any(np.diff(keys) <= 0):
                raise InvalidParams("edges must be sorted and unique")
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_edges(cls, n_nodes, pairs):
        """Build from any iterable of pairs; orientation and duplicates are normalized."""
        seen = set()
        for i, j in pairs:
            i, j = int(i), int(j)
            if i == j:
                raise InvalidParams(f"self-loop at node {i}")
            seen.add((min(i, j), max(i, j)))
        return cls(n_nodes, np.array(sorted(seen), dtype=np.int64).reshape(-1, 2))

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch("adjacency must be square")
        if not np.array_equal(a, a.T):
            raise InvalidParams("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise InvalidParams("adjacency must have zero diagonal")
        i, j = np.nonzero(np.triu(a, 1))
        return cls(a.shape[0], np.stack([i, j], axis=1))

    @property
    def n_edges(self):
        return len(self.edges)

    def degrees(self):
        return np.bincount(self.edges.ravel(), minlength=self.n_nodes)

    def to_dense(self):
        a = np.zeros((self.n_nodes, self.n_nodes))
        a[self.edges[:, 0], self.edges[:, 1]] = 1.0
        a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a

    def to_sparse(self):
        i, j = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([i, j])
        cols = np.concatenate([j, i])
        data = np.ones(len(rows))
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n_nodes, self.n_nodes))

    def permute(self, perm):
        """Relabel node ``v`` as ``perm[v]`` (the graph ``P A P^T``)."""
        perm = np.asarray(perm)
        return AdjacencyMatrix.from_edges(self.n_nodes, perm[self.edges])

    def __eq__(self, other):
        return (
            isinstance(other, AdjacencyMatrix)
            and self.n_nodes == other.n_nodes
            and np.array_equal(self.edges, other.edges)
        )

    def __hash__(self):
        return hash((self.n_nodes, self.edges.tobytes()))


@dataclass(frozen=True)
class NormalizedLaplacian:
    """Sparse symmetric operator ``D^-1/2 A D^-1/2`` (CSR)."""

    matrix: sp.csr_matrix

    @property
    def n_nodes(self):
        return self.matrix.shape[0]

    def to_dense(self):
        return self.matrix.toarray()


def _symmetric_csr(n, i, j, values):
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    data = np.concatenate([values, values])
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def normalized_laplacian(a: AdjacencyMatrix) -> NormalizedLaplacian:
    deg = a.degrees()
    isolated = np.flatnonzero(deg == 0)
    if len(isolated):
        raise IsolatedNode(int(isolated[0]))
    i, j = a.edges[:, 0], a.edges[:, 1]
    values = 1.0 / np.sqrt(deg[i].astype(float) * deg[j].astype(float))
    return NormalizedLaplacian(_symmetric_csr(a.n_nodes, i, j, values))


def laplacian_power_apply(l: NormalizedLaplacian, k: int, x) -> np.ndarray:
    """Return ``L^k X`` by ``k`` successive sparse products."""
    if k < 1:
        raise InvalidParams("k must be >= 1")
    x = np.asarray(x, dtype=float)
    if x.ndim not in (1, 2) or x.shape[0] != l.n_nodes:
        raise DimensionMismatch(f"features have {x.shape[0]} rows, graph has {l.n_nodes} nodes")
    out = x
    for _ in range(k):
        out = l.matrix @ out
    return np.asarray(out)


def laplacian_powers(l: NormalizedLaplacian, k_max: int, x) -> list[np.ndarray]:
    """``[L X, L^2 X, ..., L^k_max X]`` reusing each product for the next."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != l.n_nodes:
        raise DimensionMismatch(f"features have {x.shape[0]} rows, graph has {l.n_nodes} nodes")
    out, cur = [], x
    for _ in range(k_max):
        cur = np.asarray(l.matrix @ cur)
        out.append(cur)
    return out


def masked_laplacian(a: AdjacencyMatrix, edge_weights, degree_floor: float = 1e-8) -> np.ndarray:
    """Weighted normalized Laplacian ``w_ij / sqrt((d_i + δ)(d_j + δ))`` as a dense array.

    ``edge_weights`` is either a dense symmetric ``N x N`` matrix supported on
    the adjacency pattern or a length-``E`` vector aligned with ``a.edges``.
    The differentiable version used by the interpreter lives in
    :mod:`magnet.interpreter`; this one is the plain numpy evaluation.
    """
    n = a.n_nodes
    w = np.asarray(edge_weights, dtype=float)
    if w.ndim == 1:
        if w.shape[0] != a.n_edges:
            raise DimensionMismatch("edge weight vector length must equal edge count")
        dense = np.zeros((n, n))
        dense[a.edges[:, 0], a.edges[:, 1]] = w
        dense[a.edges[:, 1], a.edges[:, 0]] = w
        w = dense
    if w.shape != (n, n):
        raise DimensionMismatch("edge weight matrix must be n_nodes x n_nodes")
    if not np.array_equal(w, w.T):
        raise InvalidParams("edge weights must be symmetric")
    if np.any(w[a.to_dense() == 0] != 0):
        raise InvalidParams("edge weights must vanish outside the adjacency pattern")
    d = w.sum(axis=1) + degree_floor
    denom = np.sqrt(np.outer(d, d))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(denom > 0, w / denom, 0.0)


def augmented_laplacian(a: AdjacencyMatrix) -> sp.csr_matrix:
    """``D~^-1/2 (A + I) D~^-1/2``, used only by the GCN baseline."""
    at = a.to_sparse() + sp.identity(a.n_nodes, format="csr")
    deg = np.asarray(at.sum(axis=1)).ravel()
    s = sp.diags(1.0 / np.sqrt(deg))
    return sp.csr_matrix(s @ at @ s)
