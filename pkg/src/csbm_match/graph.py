"""Simple undirected graphs on vertex set ``{0, ..., n-1}``."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError


def _normalize_edges(edges, n: int) -> np.ndarray:
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if e.min() < 0 or e.max() >= n:
        raise ValidationError("edge endpoint out of range")
    if np.any(e[:, 0] == e[:, 1]):
        raise ValidationError("self-loops are not allowed")
    lo = np.minimum(e[:, 0], e[:, 1])
    hi = np.maximum(e[:, 0], e[:, 1])
    key = np.unique(lo * n + hi)
    return np.stack([key // n, key % n], axis=1)


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple graph.

    Edges are stored once as a sorted ``(m, 2)`` array with ``u < v``.  The
    symmetric CSR adjacency is built lazily and gives O(log deg) edge queries
    and O(deg) neighbourhood scans.
    """

    n: int
    edges: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n < 0:
            raise ValidationError("n must be non-negative")
        object.__setattr__(self, "edges", _normalize_edges(self.edges, self.n))
        self.edges.setflags(write=False)

    @classmethod
    def empty(cls, n: int) -> Graph:
        return cls(n, np.zeros((0, 2), dtype=np.int64))

    @classmethod
    def from_dense(cls, adj) -> Graph:
        a = np.asarray(adj)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError("adjacency must be square")
        if not np.array_equal(a, a.T):
            raise ValidationError("adjacency must be symmetric")
        if np.any(np.diag(a)):
            raise ValidationError("adjacency must have zero diagonal")
        u, v = np.nonzero(np.triu(a, 1))
        return cls(a.shape[0], np.stack([u, v], axis=1))

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * self.m, dtype=np.float64)
        a = sp.csr_matrix(
            (data, (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(self.n, self.n)
        )
        a.sort_indices()
        return a

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[v] : a.indptr[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        k = np.searchsorted(nb, v)
        return bool(k < nb.size and nb[k] == v)

    def to_dense(self, dtype=np.int8) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=dtype)
        out[self.edges[:, 0], self.edges[:, 1]] = 1
        out[self.edges[:, 1], self.edges[:, 0]] = 1
        return out

    def relabel(self, perm) -> Graph:
        """Graph with vertex ``i`` renamed ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        if perm.shape != (self.n,):
            raise ValidationError("permutation has wrong length")
        return Graph(self.n, perm[self.edges])

    def induced(self, vertices) -> tuple[Graph, np.ndarray]:
        """Induced subgraph, relabelled ``0..k-1`` in the order of ``vertices``.

        Returns the subgraph and the array mapping new ids to old ids.
        """
        vertices = np.asarray(vertices, dtype=np.int64)
        pos = np.full(self.n, -1, dtype=np.int64)
        pos[vertices] = np.arange(vertices.size)
        e = pos[self.edges]
        keep = (e[:, 0] >= 0) & (e[:, 1] >= 0)
        return Graph(vertices.size, e[keep]), vertices

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    __hash__ = None
