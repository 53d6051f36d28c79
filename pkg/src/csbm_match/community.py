"""Two-community recovery on a single SBM graph and on a matched union graph."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .errors import ValidationError
from .graph import Graph

POWER_MAX_ITER = 200
POWER_TOL = 1e-8
MAX_SWEEPS = 10


@dataclass
class LabelEstimate:
    labels: np.ndarray
    method: str = ""
    info: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.labels.size


@dataclass(frozen=True)
class RecoveryDiagnostics:
    error_fraction: float
    bad_set_size: int
    errors: int
    errors_in_bad_set: int
    maj_values: np.ndarray = field(repr=False)


def _signs(x: np.ndarray) -> np.ndarray:
    return np.where(x < 0, -1, 1).astype(np.int8)


def _power(matvec, x: np.ndarray, deflate: np.ndarray | None):
    """Power iteration; returns (unit vector, Rayleigh quotient, converged)."""
    norm = np.linalg.norm(x)
    if norm == 0.0:
        return x, 0.0, True
    x = x / norm
    lam = None
    for _ in range(POWER_MAX_ITER):
        if deflate is not None:
            x = x - deflate * (deflate @ x)
        y = matvec(x)
        if deflate is not None:
            y = y - deflate * (deflate @ y)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return x, 0.0, True
        new_lam = float(x @ y)
        x = y / norm
        if lam is not None and abs(new_lam - lam) <= POWER_TOL * max(1.0, abs(new_lam)):
            return x, new_lam, True
        lam = new_lam
    return x, lam, False


def _leading_pair(matvec, n_active: int, n_edges: int, start1: np.ndarray, start2: np.ndarray):
    v1, lam1, ok1 = _power(matvec, start1, None)
    v2, lam2, ok2 = _power(matvec, start2, v1)
    mean_deg = 2.0 * n_edges / max(1, n_active)
    info = {
        "lambda1": lam1,
        "lambda2": lam2,
        "degenerate": bool(abs(lam2) <= 2.0 * math.sqrt(mean_deg)),
        "converged": bool(ok1 and ok2),
    }
    return v1, v2, info


def spectral_partition(g: Graph, seed: int = 0, part: int = 0) -> LabelEstimate:
    """Signs of the adjacency eigenvector for the second-largest eigenvalue
    in magnitude.

    The top eigenvector is found from the all-ones start; the second by power
    iteration on the orthogonal complement from a seeded random start.  The
    result is flagged ``degenerate`` when the second eigenvalue does not
    clear the ``2 sqrt(mean degree)`` noise edge.
    """
    n = g.n
    if n == 0:
        return LabelEstimate(np.zeros(0, dtype=np.int8), "spectral", {"degenerate": True, "converged": True})
    a = g.adjacency
    start = rngmod.stream(seed, "power", part).standard_normal(n)
    v1, v2, info = _leading_pair(a.dot, n, g.m, np.ones(n), start)
    if not info["converged"]:
        warnings.warn("power iteration hit the iteration cap", RuntimeWarning, stacklevel=2)
    return LabelEstimate(_signs(v2), "spectral", dict(info, vectors=(v1, v2)))


def partition_count(n: int) -> int:
    return max(3, math.ceil(math.log(n)))


def recover_almost_exact(
    g: Graph, a: float, b: float, eps: float = 0.1, seed: int = 0, m: int | None = None
) -> LabelEstimate:
    """Hold-out spectral partition plus neighbourhood vote.

    A reference partition of the whole graph fixes the sign convention.  The
    vertices are split uniformly into ``m`` parts (default
    ``max(3, ceil(ln n))``); for each part the graph on the remaining
    vertices is partitioned spectrally (flipped to agree with the reference)
    and every held-out vertex takes the majority label of its neighbours
    outside the part (minority when ``a < b``).  Ties go to +1.

    Hold-out eigenvectors are computed by masked matrix-vector products,
    warm-started from the reference eigenvectors, so large ``m`` is cheap.
    """
    if a == b:
        raise ValidationError("a and b must differ")
    n = g.n
    ref = spectral_partition(g, seed, 0)
    ref_v1, ref_v2 = ref.info.pop("vectors")
    m = partition_count(n) if m is None else int(m)
    if m < 1:
        raise ValidationError("m must be >= 1")
    part_of = rngmod.stream(seed, "partition").integers(0, m, size=n)
    order = np.argsort(part_of, kind="stable")
    bounds = np.searchsorted(part_of[order], np.arange(m + 1))
    adj = g.adjacency
    # edges of G minus U_i = all edges - edges touching U_i
    eu, ev = part_of[g.edges[:, 0]], part_of[g.edges[:, 1]]
    touching = np.bincount(eu, minlength=m) + np.bincount(ev, minlength=m)
    touching -= np.bincount(eu[eu == ev], minlength=m)
    ref_plus = ref.labels > 0
    labels = np.ones(n, dtype=np.int8)
    degenerate = bool(ref.info["degenerate"])
    converged = bool(ref.info["converged"])
    sign = 1 if a > b else -1
    for i in range(m):
        held = order[bounds[i] : bounds[i + 1]]
        if held.size == 0:
            continue
        keep = np.ones(n)
        keep[held] = 0.0
        v1, v2, info = _leading_pair(
            lambda x: keep * adj.dot(keep * x), n - held.size, g.m - int(touching[i]), keep * ref_v1, keep * ref_v2
        )
        degenerate |= info["degenerate"]
        converged &= info["converged"]
        lab = _signs(v2).astype(float) * keep
        if np.count_nonzero((lab > 0) != ref_plus) >= n / 2:
            lab = -lab
        votes = adj[held] @ lab
        labels[held] = np.where(sign * votes < 0, -1, 1)
    if not converged:
        warnings.warn("power iteration hit the iteration cap", RuntimeWarning, stacklevel=2)
    info = {"m": m, "eps": eps, "degenerate": degenerate, "converged": converged}
    return LabelEstimate(labels, "almost-exact", info)


def majority_sweeps(g: Graph, labels: np.ndarray, a: float, b: float, max_sweeps: int = MAX_SWEEPS):
    """Synchronous neighbourhood-vote refinement; ties keep the current label."""
    sign = 1 if a > b else -1
    cur = np.asarray(labels, dtype=np.int8).copy()
    adj = g.adjacency
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        votes = sign * (adj @ cur.astype(float))
        nxt = np.where(votes > 0, 1, np.where(votes < 0, -1, cur)).astype(np.int8)
        if np.array_equal(nxt, cur):
            return cur, sweeps - 1
        cur = nxt
    return cur, sweeps


def recover_exact(
    g: Graph, a: float, b: float, eps: float = 0.1, seed: int = 0, m: int | None = None
) -> LabelEstimate:
    est = recover_almost_exact(g, a, b, eps, seed, m)
    labels, sweeps = majority_sweeps(g, est.labels, a, b)
    info = dict(est.info, sweeps=sweeps)
    return LabelEstimate(labels, "exact", info)


def _check_perm(pi, n: int) -> np.ndarray:
    pi = np.asarray(pi, dtype=np.int64)
    if pi.shape != (n,) or not np.array_equal(np.sort(pi), np.arange(n)):
        raise ValidationError("pi must be a bijection of [n]")
    return pi


def union_graph(g1: Graph, g2: Graph, pi) -> Graph:
    """Edge ``(i, j)`` iff it is in G1 or ``(pi(i), pi(j))`` is in G2."""
    if g1.n != g2.n:
        raise ValidationError("graphs must have the same vertex count")
    pi = _check_perm(pi, g1.n)
    inv = np.empty_like(pi)
    inv[pi] = np.arange(pi.size)
    return Graph(g1.n, np.concatenate([g1.edges, inv[g2.edges]]))


def intersection_graph(g1: Graph, g2: Graph, pi) -> Graph:
    if g1.n != g2.n:
        raise ValidationError("graphs must have the same vertex count")
    pi = _check_perm(pi, g1.n)
    inv = np.empty_like(pi)
    inv[pi] = np.arange(pi.size)
    n = g1.n
    e2 = np.sort(inv[g2.edges], axis=1)
    k1 = g1.edges[:, 0] * n + g1.edges[:, 1]
    k2 = e2[:, 0] * n + e2[:, 1]
    keep = np.isin(k1, k2)
    return Graph(n, g1.edges[keep])


def recover_exact_on_union(inst, pi_hat, eps: float = 0.1, seed: int = 0) -> LabelEstimate:
    """Exact recovery on ``G1 v_pi G2`` with edge rates ``a s (2 - s)``, ``b s (2 - s)``."""
    prm = inst.params
    u = union_graph(inst.g1, inst.g2, pi_hat)
    keep = prm.s * (2.0 - prm.s)
    est = recover_exact(u, prm.a * keep, prm.b * keep, eps, seed)
    est.info["graph"] = "union"
    return est


def recover_single(inst, which: int = 1, eps: float = 0.1, seed: int = 0) -> LabelEstimate:
    """Exact-recovery pipeline on one child graph (edge rates ``s a``, ``s b``)."""
    prm = inst.params
    g = inst.g1 if which == 1 else inst.g2
    return recover_exact(g, prm.a * prm.s, prm.b * prm.s, eps, seed)


def error_fraction(labels, sigma_star) -> float:
    """Disagreement rate, minimized over a global sign flip."""
    lab = np.asarray(labels)
    sig = np.asarray(sigma_star)
    if lab.size == 0:
        return 0.0
    wrong = int(np.count_nonzero(lab != sig))
    return min(wrong, lab.size - wrong) / lab.size


def misclassified(labels, sigma_star) -> np.ndarray:
    lab = np.asarray(labels)
    sig = np.asarray(sigma_star)
    wrong = lab != sig
    return wrong if wrong.sum() <= lab.size / 2 else ~wrong


def maj_values(g: Graph, sigma_star) -> np.ndarray:
    """``sigma*(v) * sum_{u ~ v} sigma*(u)`` for every vertex, as integers."""
    sig = np.asarray(sigma_star, dtype=np.int64)
    return sig * np.rint(g.adjacency @ sig.astype(float)).astype(np.int64)


def bad_set(g: Graph, sigma_star, a: float, b: float, eps: float) -> np.ndarray:
    """Mask of vertices with ``maj <= eps ln n`` or degree ``>= max(a, b) ln^3 n``."""
    ln_n = math.log(g.n)
    return (maj_values(g, sigma_star) <= eps * ln_n) | (g.degrees >= max(a, b) * ln_n**3)


def diagnose(g: Graph, labels, sigma_star, a: float, b: float, eps: float = 0.1) -> RecoveryDiagnostics:
    bad = bad_set(g, sigma_star, a, b, eps)
    wrong = misclassified(labels, sigma_star)
    return RecoveryDiagnostics(
        error_fraction=error_fraction(labels, sigma_star),
        bad_set_size=int(bad.sum()),
        errors=int(wrong.sum()),
        errors_in_bad_set=int((wrong & bad).sum()),
        maj_values=maj_values(g, sigma_star),
    )
