"""Signed rooted-tree counts and similarity scores.

Centering subtracts the marginal edge rate of each child graph: ``s p`` for
pairs whose (estimated) labels agree and ``s q`` otherwise.  With the true
labels this is ``A - E[A | sigma*]``; a mislabeled endpoint shifts the mean of
the entry by ``+-(s p - s q)``.

Counts come in two flavours.  :func:`exact_signed_count` enumerates every
embedding and is only usable on small hosts.  :func:`colorful_counts` runs the
color-coding dynamic program: for a random ``(N+1)``-coloring it sums the
edge-weight products over embeddings whose image is colorful, for every root
vertex at once.  Dividing by ``r = (N+1)!/(N+1)^(N+1)`` gives an unbiased
estimate of the exact count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from pathlib import Path
from typing import Iterable

import numpy as np

from . import rng as rngmod
from .chandelier import ChandelierFamily
from .errors import CapacityError, ValidationError
from .graph import Graph
from .model import CorrelatedInstance, derive
from .treegen import RootedTree, parents_from_levels

EXACT_MAX_N = 64
EXACT_MAX_VERTICES = 8
EXACT_MAX_EMBEDDINGS = 5_000_000
# Working-set cap (float64 cells) for one batched DP merge.
_DP_CELLS = 1 << 24


@dataclass(frozen=True, eq=False)
class CenteredMatrix:
    """``A_ij - p_in [l_i = l_j] - p_out [l_i != l_j]`` with a zero diagonal.

    Entries are evaluated from the graph and labels on demand; :meth:`dense`
    materializes the full matrix for small hosts.
    """

    base: Graph
    labels: np.ndarray
    p_in: float
    p_out: float

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.shape != (self.base.n,):
            raise ValidationError("labels must have one entry per vertex")
        if not np.all(np.abs(lab) == 1):
            raise ValidationError("labels must be +-1")

    @property
    def n(self) -> int:
        return self.base.n

    def entries(self, u, v) -> np.ndarray:
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        a = self.base.adjacency[u, v]
        a = np.asarray(a).reshape(u.shape)
        same = self.labels[u] == self.labels[v]
        out = a - np.where(same, self.p_in, self.p_out)
        return np.where(u == v, 0.0, out)

    def dense(self) -> np.ndarray:
        lab = np.asarray(self.labels)
        same = lab[:, None] == lab[None, :]
        out = self.base.adjacency.toarray() - np.where(same, self.p_in, self.p_out)
        np.fill_diagonal(out, 0.0)
        return out


def centered_matrix(g: Graph, labels, s: float, p: float, q: float) -> CenteredMatrix:
    return CenteredMatrix(g, np.asarray(labels), s * p, s * q)


def centered_pair(inst: CorrelatedInstance, labels_a=None, labels_b=None):
    """Centered matrices of both graphs.

    ``labels_b`` is indexed by G2 vertex ids.  Missing labels default to the
    ground truth (``sigma*`` and ``sigma* o pi*^{-1}``).
    """
    prm = inst.params
    la = inst.sigma_star if labels_a is None else labels_a
    lb = inst.sigma_star_b if labels_b is None else labels_b
    return (
        centered_matrix(inst.g1, la, prm.s, prm.p, prm.q),
        centered_matrix(inst.g2, lb, prm.s, prm.p, prm.q),
    )


def _as_dense(m) -> np.ndarray:
    if isinstance(m, CenteredMatrix):
        return m.dense()
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError("weight matrix must be square")
    return arr


@dataclass(frozen=True)
class Coloring:
    colors: np.ndarray
    n_colors: int

    def __post_init__(self):
        c = np.asarray(self.colors)
        if c.size and (c.min() < 0 or c.max() >= self.n_colors):
            raise ValidationError("color out of range")

    @classmethod
    def random(cls, n: int, n_colors: int, gen: np.random.Generator) -> Coloring:
        return cls(gen.integers(0, n_colors, size=n), n_colors)


def colorful_probability(n_colors: int) -> float:
    """``r = k! / k^k``: chance that ``k`` given vertices get distinct colors."""
    k = n_colors
    return math.exp(math.lgamma(k + 1) - k * math.log(k))


def default_t(n_colors: int) -> int:
    """``ceil(1/r)`` colorings per side, computed exactly on integers."""
    k = n_colors
    return -(-(k**k) // math.factorial(k))


def coloring_bank(seed: int, role: str, n: int, n_colors: int, t: int) -> np.ndarray:
    """``t`` independent colorings of ``[n]`` as a ``(t, n)`` array."""
    return rngmod.stream(seed, role, n_colors).integers(0, n_colors, size=(t, n))


# -- exact enumeration -------------------------------------------------------


def _tree_levels(tree) -> tuple[int, ...]:
    return tuple(getattr(tree, "level_seq", tree))


def exact_embedding_sums(tree, m, roots: Iterable[int] | None = None) -> np.ndarray:
    """Embedding sums for each root by frontier enumeration (no division by aut)."""
    w = _as_dense(m)
    n = w.shape[0]
    parent = parents_from_levels(_tree_levels(tree))
    nv = len(parent)
    if n > EXACT_MAX_N or nv > EXACT_MAX_VERTICES:
        raise CapacityError(f"exact count limited to n <= {EXACT_MAX_N}, tree <= {EXACT_MAX_VERTICES} vertices")
    if math.perm(n - 1, nv - 1) > EXACT_MAX_EMBEDDINGS:
        raise CapacityError("exact count would enumerate too many embeddings")
    roots = range(n) if roots is None else roots
    out = []
    for i in roots:
        imgs = np.array([[i]], dtype=np.int64)
        wt = np.ones(1)
        for k in range(1, nv):
            cand = w[imgs[:, parent[k]]]
            cand[np.arange(imgs.shape[0])[:, None], imgs] = 0.0
            s_idx, h = np.nonzero(cand)
            wt = wt[s_idx] * cand[s_idx, h]
            imgs = np.concatenate([imgs[s_idx], h[:, None]], axis=1)
        out.append(math.fsum(wt.tolist()))
    return np.array(out)


def exact_signed_count(i: int, tree: RootedTree, m) -> float:
    """Signed count of rooted copies of ``tree`` at ``i`` (embedding sum / aut)."""
    return float(exact_embedding_sums(tree, m, [i])[0]) / tree.aut


# -- color-coding DP ---------------------------------------------------------


@lru_cache(maxsize=None)
def _masks_by_popcount(v: int) -> tuple[tuple[np.ndarray, ...], np.ndarray]:
    masks = np.arange(1 << v)
    pop = np.array([bin(x).count("1") for x in masks])
    by_pop = tuple(masks[pop == k] for k in range(v + 1))
    pos = np.zeros(1 << v, dtype=np.int64)
    for arr in by_pop:
        pos[arr] = np.arange(arr.size)
    return by_pop, pos


@lru_cache(maxsize=None)
def _split_pairs(v: int, k1: int, k2: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Disjoint (S, R) index pairs with |S|=k1, |R|=k2, grouped by S|R.

    Every output mask of size ``k1+k2`` has exactly ``C(k1+k2, k1)`` splits,
    so the products can be reshaped to ``(n_out, splits)`` and summed.
    """
    by_pop, pos = _masks_by_popcount(v)
    si, ri = [], []
    for out in by_pop[k1 + k2]:
        bits = [b for b in range(v) if out >> b & 1]
        for chosen in combinations(bits, k1):
            s = sum(1 << b for b in chosen)
            si.append(pos[s])
            ri.append(pos[out ^ s])
    return np.array(si, dtype=np.int64), np.array(ri, dtype=np.int64), math.comb(k1 + k2, k1)


def _colorful_batch(w: np.ndarray, parent: list[int], colors: np.ndarray) -> np.ndarray:
    """Colorful embedding sums at every root for a batch of colorings.

    ``colors`` has shape ``(B, n)`` with values in ``[0, v)``.  Tables are
    ``(B, n, C(v, k))`` arrays over masks of popcount ``k`` (the size of the
    subtree), so only masks that can actually occur are stored.
    """
    nv = len(parent)
    bsz, n = colors.shape
    children = [[] for _ in range(nv)]
    for x, p in enumerate(parent):
        if p >= 0:
            children[p].append(x)
    # masks of popcount 1 are 1, 2, 4, ... so the leaf table is a one-hot
    leaf = (colors[:, :, None] == np.arange(nv)[None, None, :]).astype(float)
    tables: dict[int, tuple[np.ndarray, int]] = {}
    for x in reversed(range(nv)):  # children have larger preorder index
        tab, size = leaf, 1
        for y in children[x]:
            ty, ky = tables.pop(y)
            ext = np.matmul(w, ty)
            si, ri, splits = _split_pairs(nv, size, ky)
            prod = tab[:, :, si] * ext[:, :, ri]
            tab = prod.reshape(bsz, n, -1, splits).sum(axis=3)
            size += ky
        tables[x] = (tab, size)
    root, size = tables[0]
    return root[:, :, 0]


def colorful_counts(tree: RootedTree, m, colorings) -> np.ndarray:
    """``X_{h,H}`` for every root ``h`` and every coloring, shape ``(B, n)``.

    Colorful embedding sums divided by ``aut(H)``; ``colorings`` is one
    coloring or a ``(B, n)`` array, all using ``N+1`` colors.
    """
    w = _as_dense(m)
    levels = _tree_levels(tree)
    parent = parents_from_levels(levels)
    nv = len(parent)
    cols = np.atleast_2d(np.asarray(getattr(colorings, "colors", colorings), dtype=np.int64))
    if isinstance(colorings, Coloring) and colorings.n_colors != nv:
        raise ValidationError(f"coloring has {colorings.n_colors} colors, tree needs {nv}")
    if cols.shape[1] != w.shape[0]:
        raise ValidationError("coloring length does not match matrix size")
    if cols.size and (cols.min() < 0 or cols.max() >= nv):
        raise ValidationError(f"colors must lie in [0, {nv})")
    aut = getattr(tree, "aut", None) or RootedTree.from_levels(levels).aut
    n = w.shape[0]
    widest = max(math.comb(nv, k) * math.comb(nv - k, j) for k in range(nv) for j in range(nv - k + 1))
    batch = max(1, _DP_CELLS // max(1, n * widest))
    out = np.empty(cols.shape, dtype=float)
    for start in range(0, cols.shape[0], batch):
        out[start : start + batch] = _colorful_batch(w, parent, cols[start : start + batch])
    return out / aut


def colorful_signed_count(i: int, tree: RootedTree, m, coloring) -> float:
    return float(colorful_counts(tree, m, coloring)[0, i])


def colorful_sums(tree: RootedTree, m, bank: np.ndarray) -> np.ndarray:
    """``sum_a X_{h,H}(mu_a)`` over a coloring bank, accumulated in long double."""
    w = _as_dense(m)
    total = np.zeros(w.shape[0], dtype=np.longdouble)
    step = 64
    for start in range(0, bank.shape[0], step):
        total += colorful_counts(tree, w, bank[start : start + step]).astype(np.longdouble).sum(axis=0)
    return total


# -- score matrices ----------------------------------------------------------


@dataclass
class ScoreMatrix:
    """Rows index G1 vertices, columns index G2 vertices."""

    scores: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    def true_pair_scores(self, pi_star) -> np.ndarray:
        return self.scores[np.arange(self.n), np.asarray(pi_star)]

    def save(self, path) -> None:
        header = " ".join(f"{k}={self.meta.get(k, '')}" for k in ("n", "preset", "mode", "seed"))
        with open(path, "wb") as fh:
            fh.write((header + "\n").encode("ascii"))
            fh.write(np.ascontiguousarray(self.scores, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> ScoreMatrix:
        raw = Path(path).read_bytes()
        nl = raw.index(b"\n")
        meta = dict(kv.split("=", 1) for kv in raw[:nl].decode("ascii").split())
        n = int(meta["n"])
        body = np.frombuffer(raw[nl + 1 :], dtype="<f8")
        if body.size != n * n:
            raise ValidationError(f"{path}: expected {n * n} scores, found {body.size}")
        return cls(body.reshape(n, n).astype(float), meta)


def score_matrix_exact(ma, mb, family: Iterable) -> ScoreMatrix:
    """``Phi_ij = sum_H aut(H) W_{i,H}(A) W_{j,H}(B)`` by exhaustive enumeration."""
    wa, wb = _as_dense(ma), _as_dense(mb)
    n = wa.shape[0]
    acc = np.zeros((n, n), dtype=np.longdouble)
    count = 0
    for member in family:
        tree = getattr(member, "as_tree", member)
        va = exact_embedding_sums(tree, wa) / tree.aut
        vb = exact_embedding_sums(tree, wb) / tree.aut
        acc += tree.aut * np.outer(va.astype(np.longdouble), vb.astype(np.longdouble))
        count += 1
    return ScoreMatrix(acc.astype(float), {"n": n, "mode": "exact", "family_size": count})


def score_matrix_colored(
    ma,
    mb,
    family: ChandelierFamily | Iterable,
    t: int | None = None,
    seed: int = 0,
) -> ScoreMatrix:
    """Color-coding estimate of the score matrix.

    ``Phi~_ij = (1/(r t)^2) sum_H aut(H) (sum_a X_{i,H}(A, mu_a)) (sum_b X_{j,H}(B, nu_b))``
    with two independent banks of ``t`` colorings (streams ``coloring-A`` and
    ``coloring-B``), reused across all trees of the family.
    """
    wa, wb = _as_dense(ma), _as_dense(mb)
    n = wa.shape[0]
    members = list(family)
    acc = np.zeros((n, n), dtype=np.longdouble)
    meta = {"n": n, "mode": "colored", "seed": seed, "family_size": len(members)}
    if not members:
        return ScoreMatrix(acc.astype(float), meta)
    nv = getattr(members[0], "as_tree", members[0]).n_vertices
    t = default_t(nv) if t is None else int(t)
    if t < 1:
        raise ValidationError("t must be >= 1")
    r = colorful_probability(nv)
    bank_a = coloring_bank(seed, "coloring-A", n, nv, t)
    bank_b = coloring_bank(seed, "coloring-B", n, nv, t)
    for member in members:
        tree = getattr(member, "as_tree", member)
        if tree.n_vertices != nv:
            raise ValidationError("all family members must have the same size")
        xa = colorful_sums(tree, wa, bank_a)
        xb = colorful_sums(tree, wb, bank_b)
        acc += tree.aut * np.outer(xa, xb)
    acc /= np.longdouble(r * t) ** 2
    meta.update(t=t, r=r)
    return ScoreMatrix(acc.astype(float), meta)


# -- score scale -------------------------------------------------------------


def log_mu(params, family_size: int, N: int) -> float:
    """``ln(|T| n^N rho^N sigma_eff^(2N))``; ``-inf`` when the product is 0."""
    d = derive(params)
    if family_size <= 0 or d.rho <= 0 or d.sigma_eff_sq <= 0:
        return -math.inf
    return math.log(family_size) + N * (math.log(params.n) + math.log(d.rho) + math.log(d.sigma_eff_sq))


def mu_score(params, family: ChandelierFamily) -> float:
    lm = log_mu(params, family.family_size, family.N)
    if lm == -math.inf:
        return 0.0
    return math.exp(lm) if lm < 709.0 else math.inf
