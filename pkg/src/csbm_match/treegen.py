"""Unlabelled rooted trees as canonical level sequences.

A level sequence lists vertex depths in DFS preorder (root depth 0).  The
canonical sequence orders every vertex's child subtrees by descending
canonical sequence, which makes it the lexicographically largest preorder
sequence of the tree; two rooted trees are isomorphic iff their canonical
sequences are equal.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import CapacityError, ValidationError

MAX_ENUM_EDGES = 22


def parents_from_levels(levels: Sequence[int]) -> list[int]:
    """Parent of each preorder vertex (``-1`` for the root)."""
    parent = [-1] * len(levels)
    last_at = {}
    for i, d in enumerate(levels):
        if i:
            if d < 1 or d - 1 not in last_at:
                raise ValidationError(f"not a level sequence: {tuple(levels)}")
            parent[i] = last_at[d - 1]
        elif d != 0:
            raise ValidationError("level sequence must start at depth 0")
        last_at[d] = i
        # deeper entries are no longer reachable as parents
        for k in [k for k in last_at if k > d]:
            del last_at[k]
    return parent


def children_lists(parent: Sequence[int]) -> list[list[int]]:
    ch = [[] for _ in parent]
    for v, p in enumerate(parent):
        if p >= 0:
            ch[p].append(v)
    return ch


def _canon_from_children(children: Sequence[Sequence[int]], root: int) -> tuple[int, ...]:
    order = []
    stack = [root]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(children[v])
    canon = {}
    for v in reversed(order):
        subs = sorted((canon[c] for c in children[v]), reverse=True)
        seq = [0]
        for s in subs:
            seq.extend(d + 1 for d in s)
        canon[v] = tuple(seq)
    return canon[root]


def canonical_levels(levels: Sequence[int]) -> tuple[int, ...]:
    return _canon_from_children(children_lists(parents_from_levels(levels)), 0)


def canonical_from_edges(n_vertices: int, edges, root: int = 0) -> tuple[int, ...]:
    """Canonical level sequence of a tree given as an edge list."""
    adj = [[] for _ in range(n_vertices)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    children = [[] for _ in range(n_vertices)]
    seen = {root}
    stack = [root]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                children[v].append(w)
                stack.append(w)
    if len(seen) != n_vertices or len(edges) != n_vertices - 1:
        raise ValidationError("edge list is not a spanning tree")
    return _canon_from_children(children, root)


def _aut_from_children(children: Sequence[Sequence[int]], root: int) -> int:
    order = []
    stack = [root]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(children[v])
    canon, aut = {}, {}
    for v in reversed(order):
        subs = [canon[c] for c in children[v]]
        a = 1
        for c in children[v]:
            a *= aut[c]
        for mult in Counter(subs).values():
            a *= math.factorial(mult)
        seq = [0]
        for s in sorted(subs, reverse=True):
            seq.extend(d + 1 for d in s)
        canon[v] = tuple(seq)
        aut[v] = a
    return aut[root]


def max_degree(levels: Sequence[int]) -> int:
    parent = parents_from_levels(levels)
    deg = [0] * len(levels)
    for v, p in enumerate(parent):
        if p >= 0:
            deg[v] += 1
            deg[p] += 1
    return max(deg)


@dataclass(frozen=True, order=True)
class RootedTree:
    """A rooted tree in canonical form.

    Ordering and equality follow the level sequence, so sorting a list of
    trees sorts it canonically.
    """

    level_seq: tuple[int, ...]
    k_edges: int = field(compare=False)
    aut: int = field(compare=False)
    max_deg: int = field(compare=False)

    @classmethod
    def from_levels(cls, levels: Sequence[int]) -> RootedTree:
        canon = canonical_levels(levels)
        return cls(canon, len(canon) - 1, aut_count_levels(canon), max_degree(canon))

    @classmethod
    def from_edges(cls, n_vertices: int, edges, root: int = 0) -> RootedTree:
        return cls.from_levels(canonical_from_edges(n_vertices, edges, root))

    @property
    def n_vertices(self) -> int:
        return len(self.level_seq)

    @property
    def parents(self) -> list[int]:
        return parents_from_levels(self.level_seq)

    def edges(self) -> list[tuple[int, int]]:
        """(parent, child) pairs in preorder vertex numbering."""
        return [(p, v) for v, p in enumerate(self.parents) if p >= 0]

    def __repr__(self) -> str:
        return f"RootedTree({''.join(map(str, self.level_seq)) if max(self.level_seq) < 10 else self.level_seq})"


def aut_count_levels(levels: Sequence[int]) -> int:
    return _aut_from_children(children_lists(parents_from_levels(levels)), 0)


def aut_count(tree: RootedTree | Sequence[int]) -> int:
    """Number of root-fixing automorphisms.

    Children of each vertex are grouped by canonical subtree; the count is the
    product of the children's counts times the factorial of every group size.
    """
    levels = tree.level_seq if isinstance(tree, RootedTree) else tree
    return aut_count_levels(levels)


def iter_level_sequences(n_vertices: int) -> Iterator[tuple[int, ...]]:
    """Canonical level sequences of all rooted trees on ``n_vertices`` vertices.

    Successor rule of Beyer and Hershberger: starting from the path, find the
    last vertex ``p`` deeper than 1, the last earlier vertex ``q`` at depth
    ``depth[p] - 1``, and copy the block ``q..p-1`` periodically over
    ``p..end``.  Sequences come out in decreasing lexicographic order, ending
    with the star.
    """
    if n_vertices < 1:
        raise ValidationError("a rooted tree has at least one vertex")
    s = list(range(n_vertices))
    while True:
        yield tuple(s)
        p = n_vertices - 1
        while p > 0 and s[p] == 1:
            p -= 1
        if p == 0:
            return
        target = s[p] - 1
        q = p - 1
        while s[q] != target:
            q -= 1
        d = p - q
        for i in range(p, n_vertices):
            s[i] = s[i - d]


def _check_guard(k_edges: int) -> None:
    if k_edges < 0:
        raise ValidationError("k_edges must be non-negative")
    if k_edges > MAX_ENUM_EDGES:
        raise CapacityError(f"rooted-tree enumeration is capped at {MAX_ENUM_EDGES} edges (asked {k_edges})")


def count_rooted_trees(k_edges: int) -> int:
    _check_guard(k_edges)
    return sum(1 for _ in iter_level_sequences(k_edges + 1))


def enumerate_rooted_trees(k_edges: int) -> list[RootedTree]:
    """One canonical tree per isomorphism class, sorted ascending."""
    _check_guard(k_edges)
    seqs = list(iter_level_sequences(k_edges + 1))
    seqs.reverse()
    return [RootedTree(s, k_edges, aut_count_levels(s), max_degree(s)) for s in seqs]


@dataclass(frozen=True)
class BulbCatalog:
    """The filtered bulb set: K-edge rooted trees with aut <= R and max degree <= D.

    ``R`` or ``D`` of ``None`` means no bound.  ``counts`` holds the sizes of
    the unfiltered, aut-only and degree-only catalogs for diagnostics.
    """

    trees: tuple[RootedTree, ...]
    K: int
    R: int | None
    D: int | None
    counts: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.trees)

    def __getitem__(self, i: int) -> RootedTree:
        return self.trees[i]

    def __iter__(self):
        return iter(self.trees)

    @property
    def empty(self) -> bool:
        return not self.trees

    def log_aut_histogram(self, bins: int = 10) -> tuple[np.ndarray, np.ndarray]:
        values = np.array([math.log(t.aut) for t in self.trees], dtype=float)
        return np.histogram(values, bins=bins)

    def to_text(self) -> str:
        r = "inf" if self.R is None else str(self.R)
        d = "inf" if self.D is None else str(self.D)
        lines = [f"{self.K} {r} {d} {len(self.trees)}"]
        lines += [" ".join(map(str, t.level_seq)) for t in self.trees]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> BulbCatalog:
        rows = [ln.split() for ln in text.strip().splitlines()]
        k, r, d, cnt = rows[0]
        trees = tuple(RootedTree.from_levels([int(x) for x in row]) for row in rows[1:])
        if len(trees) != int(cnt):
            raise ValidationError("catalog header count does not match body")
        return cls(trees, int(k), None if r == "inf" else int(r), None if d == "inf" else int(d))


def build_catalog(K: int, R: int | None = None, D: int | None = None) -> BulbCatalog:
    """Filter the K-edge rooted trees by automorphism count and max degree.

    The aut bound is compared exactly on integers.  An empty result is
    returned (with a warning) rather than raised.
    """
    if R is not None and R < 1:
        raise ValidationError("R must be >= 1")
    if D is not None and D < 0:
        raise ValidationError("D must be >= 0")
    all_trees = enumerate_rooted_trees(K)
    ok_r = [R is None or t.aut <= R for t in all_trees]
    ok_d = [D is None or t.max_deg <= D for t in all_trees]
    trees = tuple(t for t, x, y in zip(all_trees, ok_r, ok_d) if x and y)
    counts = {"all": len(all_trees), "aut_only": sum(ok_r), "deg_only": sum(ok_d), "kept": len(trees)}
    if not trees:
        warnings.warn(f"bulb catalog J({K},{R},{D}) is empty", RuntimeWarning, stacklevel=2)
    return BulbCatalog(trees, K, R, D, counts)
