"""Brute-force reference implementations.

Everything here is deliberately naive and shares no code with the fast paths
in :mod:`treegen` and :mod:`counting`, so agreement between the two is
meaningful.  Size caps are checked before any enumeration starts.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import CapacityError, ValidationError


@dataclass(frozen=True)
class OracleBudget:
    max_n: int = 12
    max_tree_vertices: int = 8
    max_perm_vertices: int = 10

    def check_embedding(self, n: int, tree_vertices: int) -> None:
        if n > self.max_n:
            raise CapacityError(f"oracle host size {n} exceeds cap {self.max_n}")
        if tree_vertices > self.max_tree_vertices:
            raise CapacityError(f"oracle tree size {tree_vertices} exceeds cap {self.max_tree_vertices}")

    def check_perm(self, n_vertices: int) -> None:
        if n_vertices > self.max_perm_vertices:
            raise CapacityError(f"oracle permutation size {n_vertices} exceeds cap {self.max_perm_vertices}")


DEFAULT_BUDGET = OracleBudget()


def _tree_parts(tree) -> tuple[int, list[tuple[int, int]]]:
    """Vertex count and (parent, child) edges from a RootedTree or a level sequence."""
    levels = list(getattr(tree, "level_seq", tree))
    edges = []
    stack = []  # stack[d] = most recent vertex at depth d
    for v, d in enumerate(levels):
        del stack[d:]
        if d:
            edges.append((stack[d - 1], v))
        stack.append(v)
    return len(levels), edges


def _adjacency_sets(n_vertices: int, edges) -> list[set]:
    adj = [set() for _ in range(n_vertices)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


def brute_aut(tree, budget: OracleBudget = DEFAULT_BUDGET) -> int:
    """Count root-fixing bijections of the vertex set that preserve adjacency."""
    nv, edges = _tree_parts(tree)
    budget.check_perm(nv)
    adj = _adjacency_sets(nv, edges)
    image = [-1] * nv
    image[0] = 0
    used = [False] * nv
    used[0] = True

    def extend(k: int) -> int:
        if k == nv:
            return 1
        total = 0
        for w in range(1, nv):
            if used[w]:
                continue
            ok = True
            for x in range(k):
                if (x in adj[k]) != (image[x] in adj[w]):
                    ok = False
                    break
            if ok:
                image[k] = w
                used[w] = True
                total += extend(k + 1)
                used[w] = False
        return total

    return extend(1)


def _ahu_string(children: list[list[int]], v: int) -> str:
    return "(" + "".join(sorted(_ahu_string(children, c) for c in children[v])) + ")"


def _parent_arrays(v: int):
    """Non-decreasing parent arrays with parent[k] < k.

    Every rooted tree has a breadth-first labelling, and breadth-first labels
    give exactly such arrays, so this covers every isomorphism class.
    """
    parent = [-1] * v

    def rec(k: int, lo: int):
        if k == v:
            yield parent
            return
        for p in range(lo, k):
            parent[k] = p
            yield from rec(k + 1, p)

    yield from rec(1, 0)


def brute_rooted_tree_census(v: int) -> int:
    """Number of unlabelled rooted trees on ``v`` vertices by labelled enumeration."""
    if v < 1:
        raise ValidationError("v must be >= 1")
    if v > 10:
        raise CapacityError("census oracle is capped at 10 vertices")
    forms = set()
    for parent in _parent_arrays(v):
        children = [[] for _ in range(v)]
        for k in range(1, v):
            children[parent[k]].append(k)
        forms.add(_ahu_string(children, 0))
    return len(forms)


def brute_embeddings(
    i: int,
    tree,
    matrix,
    coloring=None,
    *,
    subgraphs: bool = False,
    budget: OracleBudget = DEFAULT_BUDGET,
) -> float:
    """Sum of edge-weight products over injective maps of ``tree`` into ``[n]``.

    The root is pinned to ``i``.  With ``coloring`` only maps whose image has
    pairwise distinct colors count.  With ``subgraphs=True`` the embedding sum
    is divided by the rooted automorphism count (computed by :func:`brute_aut`).
    """
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    nv, edges = _tree_parts(tree)
    budget.check_embedding(n, nv)
    parent = [-1] * nv
    for p, c in edges:
        parent[c] = p
    colors = None if coloring is None else np.asarray(getattr(coloring, "colors", coloring))
    image = [0] * nv
    image[0] = i

    def rec(k: int, used: set, used_colors: set, weight: float) -> float:
        if k == nv:
            return weight
        total = 0.0
        hp = image[parent[k]]
        for h in range(n):
            if h in used:
                continue
            if colors is not None and colors[h] in used_colors:
                continue
            w = m[hp, h]
            if w == 0.0:
                continue
            image[k] = h
            used.add(h)
            if colors is not None:
                used_colors.add(colors[h])
            total += rec(k + 1, used, used_colors, weight * w)
            used.discard(h)
            if colors is not None:
                used_colors.discard(colors[h])
        return total

    start_colors = set() if colors is None else {colors[i]}
    total = rec(1, {i}, start_colors, 1.0)
    if subgraphs:
        total /= brute_aut(tree)
    return total


def falling_factorial(n: int, k: int) -> int:
    return factorial(n) // factorial(n - k) if 0 <= k <= n else 0
