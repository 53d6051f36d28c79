"""Self-checks against the brute-force oracles and Monte Carlo moment estimates.

Used by ``csbm verify`` so the cross-checks can be rerun on any install.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import oracle, treegen
from .chandelier import build_family
from .counting import colorful_signed_count, exact_signed_count
from .model import CorrelatedInstance, ModelParams, derive, generate_csbm


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str = ""


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    se: float
    count: int


def _pair_keys(edges: np.ndarray, n: int) -> np.ndarray:
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    return lo * n + hi


def _pairs_by_type(labels: np.ndarray) -> tuple[int, int]:
    n = labels.size
    plus = int(np.count_nonzero(labels > 0))
    same = plus * (plus - 1) // 2 + (n - plus) * (n - plus - 1) // 2
    return same, n * (n - 1) // 2 - same


def cross_moment(inst: CorrelatedInstance, same: bool) -> MomentEstimate:
    """Mean of ``(A_e - m)(B_{pi*(e)} - m)`` over all pairs of one type.

    ``m`` is the marginal rate ``s p`` (same community) or ``s q``; the sum is
    evaluated from the edge lists, so every pair is included exactly.
    """
    prm = inst.params
    n = inst.n
    lab = inst.sigma_star.astype(np.int64)
    rate = prm.s * (prm.p if same else prm.q)
    e1 = inst.g1.edges
    e2 = inst.pi_inverse[inst.g2.edges]
    t1 = (lab[e1[:, 0]] == lab[e1[:, 1]]) == same
    t2 = (lab[e2[:, 0]] == lab[e2[:, 1]]) == same
    k1 = _pair_keys(e1[t1], n)
    k2 = _pair_keys(e2[t2], n)
    both = np.intersect1d(k1, k2).size
    na, nb = k1.size, k2.size
    n_same, n_diff = _pairs_by_type(lab)
    total = n_same if same else n_diff
    # products take four values depending on (A_e, B_e)
    vals = np.array([(1 - rate) ** 2, -(1 - rate) * rate, -(1 - rate) * rate, rate**2])
    cnts = np.array([both, na - both, nb - both, total - na - nb + both], dtype=float)
    mean = float(vals @ cnts / total)
    var = float(((vals - mean) ** 2) @ cnts / (total - 1))
    return MomentEstimate(mean, math.sqrt(var / total), total)


def centering_bias(inst: CorrelatedInstance, flipped: np.ndarray, true_same: bool) -> MomentEstimate:
    """Mean of G1's centered entries on pairs with exactly one endpoint in ``flipped``.

    Labels of ``flipped`` vertices are negated before centering, so the
    selected pairs are centered with the wrong rate.  ``true_same`` picks
    pairs whose true labels agree (expected mean ``s(p - q)``) or differ
    (expected ``s(q - p)``).
    """
    prm = inst.params
    n = inst.n
    lab = inst.sigma_star.astype(np.int64)
    f = np.zeros(n, dtype=bool)
    f[np.asarray(flipped)] = True
    wrong_rate = prm.s * (prm.q if true_same else prm.p)
    e = inst.g1.edges
    sel = (f[e[:, 0]] != f[e[:, 1]]) & ((lab[e[:, 0]] == lab[e[:, 1]]) == true_same)
    n_edges = int(np.count_nonzero(sel))
    total = 0
    for sign in (1, -1):
        in_f = int(np.count_nonzero(f & (lab == sign)))
        out_f = int(np.count_nonzero(~f & (lab == sign)))
        other_out = int(np.count_nonzero(~f & (lab == -sign)))
        total += in_f * (out_f if true_same else other_out)
    frac = n_edges / total
    mean = frac - wrong_rate
    return MomentEstimate(mean, math.sqrt(frac * (1 - frac) / total), total)


# -- suites ------------------------------------------------------------------


def suite_trees() -> list[Check]:
    out = []
    for v in range(1, 11):
        fast = treegen.count_rooted_trees(v - 1)
        slow = oracle.brute_rooted_tree_census(v)
        out.append(Check(f"census v={v}", fast == slow, f"{fast} vs {slow}"))
    bad = 0
    total = 0
    for k in range(0, 8):
        for t in treegen.enumerate_rooted_trees(k):
            total += 1
            bad += t.aut != oracle.brute_aut(t)
    out.append(Check("aut vs brute force (<= 8 vertices)", bad == 0, f"{bad} mismatches of {total}"))
    fam = build_family(treegen.build_catalog(3), 2, 1)
    bad = sum(c.as_tree.aut != c.aut for c in fam)
    out.append(Check("chandelier product rule (K=3, L=2, M=1)", bad == 0, f"{bad} of {len(fam)}"))
    return out


def suite_counting(cases: int = 60, seed: int = 7) -> list[Check]:
    gen = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        n = int(gen.integers(4, 10))
        k = int(gen.integers(1, min(n, 6)))
        trees = treegen.enumerate_rooted_trees(k)
        t = trees[int(gen.integers(len(trees)))]
        w = gen.normal(size=(n, n))
        w = (w + w.T) / 2.0
        np.fill_diagonal(w, 0.0)
        col = gen.integers(0, t.n_vertices, size=n)
        i = int(gen.integers(n))
        fast = colorful_signed_count(i, t, w, col)
        slow = oracle.brute_embeddings(i, t, w, col, subgraphs=True)
        worst = max(worst, abs(fast - slow) / max(1.0, abs(slow)))
    out = [Check(f"colorful DP vs brute force ({cases} cases)", bool(worst <= 1e-9), f"max rel err {worst:.2e}")]
    w = np.ones((7, 7)) - np.eye(7)
    path = treegen.RootedTree.from_levels([0, 1, 2])
    val = exact_signed_count(0, path, w)
    out.append(Check("exact count, 2-path on K7", val == 30.0, f"{val}"))
    return out


def suite_moments(seed: int = 11) -> list[Check]:
    prm = ModelParams(1500, 20.0, 5.0, 0.8, seed)
    inst = generate_csbm(prm)
    d = derive(prm)
    out = []
    for same, target in ((True, d.rho_plus * d.sigma_plus_sq), (False, d.rho_minus * d.sigma_minus_sq)):
        est = cross_moment(inst, same)
        ok = bool(abs(est.mean - target) <= 4 * est.se)
        out.append(Check(f"cross moment ({'same' if same else 'cross'})", ok, f"{est.mean:.5g} vs {target:.5g}"))
    flipped = np.flatnonzero(np.random.default_rng(seed).random(prm.n) < 0.1)
    est = centering_bias(inst, flipped, True)
    target = prm.s * (prm.p - prm.q)
    out.append(Check("mislabeled-endpoint bias", bool(abs(est.mean - target) <= 4 * est.se), f"{est.mean:.5g} vs {target:.5g}"))
    return out


SUITES = {"trees": suite_trees, "counting": suite_counting, "moments": suite_moments}


def run_suites(name: str) -> list[Check]:
    names = list(SUITES) if name == "all" else [name]
    out = []
    for nm in names:
        out.extend(SUITES[nm]())
    return out

