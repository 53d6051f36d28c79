"""Chandeliers: a root with L wires of M edges, each ending in a distinct bulb.

The vertex at the far end of a wire is the root of its bulb, so a chandelier
with K-edge bulbs has ``N = L (K + M)`` edges.  Bulbs are pairwise
non-isomorphic and wires are rigid paths, so the rooted automorphisms of a
chandelier are exactly the products of the bulbs' automorphisms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import ValidationError
from .model import OTTER_ALPHA, ModelParams
from .treegen import BulbCatalog, RootedTree, build_catalog

# Color-coding DP feasibility guard: 3^(N+1) <= 2^26.
DP_MASK_LIMIT = 1 << 26


@dataclass(frozen=True)
class Chandelier:
    bulb_ids: tuple[int, ...]
    wire_len: int
    as_tree: RootedTree
    aut: int

    @property
    def n_vertices(self) -> int:
        return self.as_tree.n_vertices

    @property
    def n_edges(self) -> int:
        return self.as_tree.k_edges


def assemble_edges(bulbs: Sequence[RootedTree], M: int) -> tuple[int, list[tuple[int, int]]]:
    """Vertex count and edge list of the chandelier built from ``bulbs`` (root is 0)."""
    if M < 1:
        raise ValidationError("wire length M must be >= 1")
    edges = []
    nxt = 1
    for bulb in bulbs:
        prev = 0
        for _ in range(M):
            edges.append((prev, nxt))
            prev = nxt
            nxt += 1
        base = prev  # bulb root
        ids = [base] + list(range(nxt, nxt + bulb.n_vertices - 1))
        nxt += bulb.n_vertices - 1
        for p, c in bulb.edges():
            edges.append((ids[p], ids[c]))
    return nxt, edges


def assemble(bulbs: Sequence[RootedTree], M: int) -> RootedTree:
    nv, edges = assemble_edges(bulbs, M)
    return RootedTree.from_edges(nv, edges)


@dataclass(frozen=True)
class ChandelierFamily:
    """All chandeliers using ``L`` distinct bulbs from ``bulbs``.

    Members are produced lazily in lexicographic bulb-id order.
    """

    bulbs: BulbCatalog
    L: int
    M: int
    family_size: int = field(init=False)

    def __post_init__(self):
        if self.L < 1:
            raise ValidationError("L must be >= 1")
        if self.M < 1:
            raise ValidationError("M must be >= 1")
        if self.L > len(self.bulbs):
            raise ValidationError(f"L={self.L} exceeds catalog size {len(self.bulbs)}")
        object.__setattr__(self, "family_size", math.comb(len(self.bulbs), self.L))

    @property
    def K(self) -> int:
        return self.bulbs.K

    @property
    def N(self) -> int:
        return self.L * (self.K + self.M)

    def __len__(self) -> int:
        return self.family_size

    def member(self, bulb_ids: Sequence[int]) -> Chandelier:
        ids = tuple(int(i) for i in bulb_ids)
        if len(ids) != self.L or any(b <= a for a, b in zip(ids, ids[1:])):
            raise ValidationError("bulb ids must be L strictly increasing indices")
        if ids[0] < 0 or ids[-1] >= len(self.bulbs):
            raise ValidationError("bulb id out of range")
        chosen = [self.bulbs[i] for i in ids]
        aut = math.prod(b.aut for b in chosen)
        return Chandelier(ids, self.M, assemble(chosen, self.M), aut)

    def __iter__(self) -> Iterator[Chandelier]:
        for ids in itertools.combinations(range(len(self.bulbs)), self.L):
            yield self.member(ids)

    def random_members(self, count: int, gen: np.random.Generator) -> list[Chandelier]:
        out = []
        for _ in range(count):
            ids = np.sort(gen.choice(len(self.bulbs), size=self.L, replace=False))
            out.append(self.member(ids))
        return out

    def dp_cost(self, n: int) -> int:
        """Operation-count estimate ``|T| N 3^N n^2`` of the color-coding DP."""
        return self.family_size * self.N * 3 ** self.N * n * n


def build_family(catalog: BulbCatalog, L: int, M: int) -> ChandelierFamily:
    return ChandelierFamily(catalog, L, M)


@dataclass(frozen=True)
class Preset:
    name: str
    K: int
    L: int
    M: int
    R: int | None = None
    D: int | None = None

    @property
    def N(self) -> int:
        return self.L * (self.K + self.M)

    def family(self) -> ChandelierFamily:
        return build_family(build_catalog(self.K, self.R, self.D), self.L, self.M)


PRESETS = {
    "tiny": Preset("tiny", K=2, L=2, M=1),
    "small": Preset("small", K=3, L=2, M=1),
    "medium": Preset("medium", K=3, L=3, M=2),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def dp_feasible(N: int) -> bool:
    return 3 ** (N + 1) <= DP_MASK_LIMIT


def implied_constants(preset: Preset, params: ModelParams) -> dict:
    """Constants C1..C5 that a preset would correspond to under the
    asymptotic schema ``L = C1/eps, K = C2 ln n, M = C3 K / ln(n s (p^q)),
    R = exp(C4 K), D = C5 ln n / (ln ln n)^2`` with ``eps = s^2 - alpha``.

    Documentation only: nothing downstream consumes these numbers.
    """
    ln_n = params.log_n
    eps = params.s ** 2 - OTTER_ALPHA
    base = params.n * params.s * min(params.p, params.q)
    c3 = preset.M * math.log(base) / preset.K if base > 1 else float("nan")
    c4 = math.inf if preset.R is None else math.log(preset.R) / preset.K
    c5 = math.inf if preset.D is None else preset.D * math.log(ln_n) ** 2 / ln_n
    return {"eps": eps, "C1": preset.L * eps, "C2": preset.K / ln_n, "C3": c3, "C4": c4, "C5": c5}
