"""Correlated two-community stochastic block models.

A parent graph is drawn from SBM(n, p, q) with ``p = a ln n / n`` and
``q = b ln n / n``; two children keep each parent edge independently with
probability ``s``; the second child is relabelled by a uniform permutation.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import rng as rngmod
from .errors import ValidationError
from .graph import Graph

# Otter's rooted-tree constant to 7 digits.
OTTER_ALPHA = 0.3383219

_ROW_BLOCK_CELLS = 1 << 22


@dataclass(frozen=True)
class ModelParams:
    n: int
    a: float
    b: float
    s: float
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4:
            raise ValidationError(f"n must be an integer >= 4, got {self.n}")
        if not (self.a > 0 and self.b > 0):
            raise ValidationError("a and b must be positive")
        if not 0.0 <= self.s <= 1.0:
            raise ValidationError("s must lie in [0, 1]")
        if self.p > 1.0 or self.q > 1.0:
            raise ValidationError(
                f"edge probability exceeds 1 (p={self.p:.4g}, q={self.q:.4g}); n too small for a, b"
            )

    @property
    def log_n(self) -> float:
        return math.log(self.n)

    @property
    def p(self) -> float:
        return self.a * math.log(self.n) / self.n

    @property
    def q(self) -> float:
        return self.b * math.log(self.n) / self.n


@dataclass(frozen=True)
class DerivedParams:
    p: float
    q: float
    rho_plus: float
    rho_minus: float
    rho: float
    sigma_plus_sq: float
    sigma_minus_sq: float
    sigma_eff_sq: float
    d_plus: float
    delta: float


def chernoff_hellinger(a: float, b: float) -> float:
    return (math.sqrt(a) - math.sqrt(b)) ** 2 / 2.0


def _edge_correlation(s: float, p: float) -> float:
    den = 1.0 - p * s
    # p = s = 1: both children equal the parent, which is deterministic.
    return s * (1.0 - p) / den if den > 0 else 1.0


def derive_from(p: float, q: float, s: float, a: float, b: float) -> DerivedParams:
    rp = _edge_correlation(s, p)
    rm = _edge_correlation(s, q)
    sp2 = s * p * (1.0 - s * p)
    sm2 = s * q * (1.0 - s * q)
    return DerivedParams(
        p=p,
        q=q,
        rho_plus=rp,
        rho_minus=rm,
        rho=(rp + rm) / 2.0,
        sigma_plus_sq=sp2,
        sigma_minus_sq=sm2,
        sigma_eff_sq=(sp2 + sm2) / 2.0,
        d_plus=chernoff_hellinger(a, b),
        delta=abs(s * p - s * q),
    )


def derive(params: ModelParams) -> DerivedParams:
    return derive_from(params.p, params.q, params.s, params.a, params.b)


def h(x: float) -> float:
    """Cramér rate function ``x ln x - x + 1`` of a unit-mean Poisson variable."""
    if x <= 0:
        raise ValidationError("h is defined for x > 0")
    return x * math.log(x) - x + 1.0


def solve_h(target: float) -> float:
    """The root of ``h(x) = target`` on ``[1, inf)``.

    ``h`` is strictly increasing there, so the root is unique; ``target = 0``
    returns 1.
    """
    if not target >= 0:
        raise ValidationError("target must be non-negative")
    if target == 0:
        return 1.0
    hi = 2.0
    while h(hi) < target:
        hi *= 2.0
    x = brentq(lambda z: h(z) - target, 1.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    # Newton polish; h'(x) = ln x > 0 on (1, inf).
    for _ in range(3):
        step = (h(x) - target) / math.log(x)
        if step == 0.0:
            break
        x -= step
    return x


@dataclass(frozen=True, eq=False)
class CorrelatedInstance:
    """Two correlated graphs with their hidden labels and alignment.

    ``sigma_star[i]`` is the label of G1 vertex ``i``; ``pi_star[i]`` is the
    G2 id of G1 vertex ``i``.  ``balanced`` records whether the community
    sizes are within ``n^{3/4}`` of ``n/2``.
    """

    params: ModelParams
    g1: Graph
    g2: Graph
    sigma_star: np.ndarray
    pi_star: np.ndarray
    balanced: bool

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def pi_inverse(self) -> np.ndarray:
        inv = np.empty_like(self.pi_star)
        inv[self.pi_star] = np.arange(self.n)
        return inv

    @property
    def sigma_star_b(self) -> np.ndarray:
        """Labels indexed by G2 vertex ids, ``sigma* o pi*^{-1}``."""
        return self.sigma_star[self.pi_inverse]


def is_balanced(labels: np.ndarray) -> bool:
    n = labels.size
    return abs(int(np.sum(labels > 0)) - n / 2.0) <= n ** 0.75


def _parent_edges(labels: np.ndarray, p: float, q: float, gen: np.random.Generator) -> np.ndarray:
    """Stream SBM edges row-block by row-block; never holds the n x n matrix."""
    n = labels.size
    block = max(1, _ROW_BLOCK_CELLS // n)
    cols = np.arange(n)
    out = []
    for start in range(0, n, block):
        rows = np.arange(start, min(n, start + block))
        u = gen.random((rows.size, n))
        prob = np.where(labels[rows, None] == labels[None, :], p, q)
        hit = (u < prob) & (cols[None, :] > rows[:, None])
        r, c = np.nonzero(hit)
        out.append(np.stack([rows[r], c], axis=1))
    return np.concatenate(out) if out else np.zeros((0, 2), dtype=np.int64)


def generate_csbm(params: ModelParams) -> CorrelatedInstance:
    """Draw ``(G1, G2) ~ CSBM(n, p, q, s)``; deterministic in ``params.seed``."""
    n, seed = params.n, params.seed
    labels = rngmod.stream(seed, "labels").choice(np.array([-1, 1], dtype=np.int8), size=n)
    parent = _parent_edges(labels, params.p, params.q, rngmod.stream(seed, "parent"))
    m = parent.shape[0]
    keep1 = rngmod.stream(seed, "subsample1").random(m) < params.s
    keep2 = rngmod.stream(seed, "subsample2").random(m) < params.s
    pi = rngmod.stream(seed, "permutation").permutation(n).astype(np.int64)
    g1 = Graph(n, parent[keep1])
    g2 = Graph(n, pi[parent[keep2]])
    return CorrelatedInstance(params, g1, g2, labels, pi, is_balanced(labels))


# -- on-disk bundle ---------------------------------------------------------


def write_edges(path, g: Graph) -> None:
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.m}\n")
        for u, v in g.edges:
            fh.write(f"{u} {v}\n")


def read_edges(path) -> Graph:
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 2:
            raise ValidationError(f"{path}: first line must be 'n m'")
        n, m = int(head[0]), int(head[1])
        data = np.loadtxt(fh, dtype=np.int64, ndmin=2) if m else np.zeros((0, 2), dtype=np.int64)
    if data.shape[0] != m:
        raise ValidationError(f"{path}: header says {m} edges, found {data.shape[0]}")
    return Graph(n, data)


def save_instance(inst: CorrelatedInstance, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    meta = {
        "params": asdict(inst.params),
        "seed": inst.params.seed,
        "derived": asdict(derive(inst.params)),
        "balanced": inst.balanced,
    }
    (d / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    write_edges(d / "g1.edges", inst.g1)
    write_edges(d / "g2.edges", inst.g2)
    np.savetxt(d / "sigma.txt", inst.sigma_star, fmt="%d")
    np.savetxt(d / "pi.txt", inst.pi_star, fmt="%d")
    return d


def load_instance(directory) -> CorrelatedInstance:
    d = Path(directory)
    meta = json.loads((d / "meta.json").read_text())
    params = ModelParams(**meta["params"])
    sigma = np.loadtxt(d / "sigma.txt", dtype=np.int64, ndmin=1).astype(np.int8)
    pi = np.loadtxt(d / "pi.txt", dtype=np.int64, ndmin=1)
    if sigma.size != params.n or pi.size != params.n:
        raise ValidationError("label/permutation files do not match n")
    if not np.array_equal(np.sort(pi), np.arange(params.n)):
        raise ValidationError("pi.txt is not a permutation")
    return CorrelatedInstance(
        params, read_edges(d / "g1.edges"), read_edges(d / "g2.edges"), sigma, pi, is_balanced(sigma)
    )
