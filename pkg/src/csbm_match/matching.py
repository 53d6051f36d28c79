"""Score thresholding, seeded common-neighbour boosting, and the end-to-end pipeline."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import community
from .chandelier import Preset, get_preset
from .counting import ScoreMatrix, centered_pair, mu_score, score_matrix_colored
from .errors import ValidationError
from .graph import Graph
from .model import CorrelatedInstance, ModelParams, solve_h


@dataclass
class PartialMatching:
    """Injective map ``src[k] -> dst[k]`` from a subset of ``[n]`` into ``[n]``."""

    n: int
    src: np.ndarray
    dst: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64).reshape(-1)
        self.dst = np.asarray(self.dst, dtype=np.int64).reshape(-1)
        if self.src.shape != self.dst.shape:
            raise ValidationError("src and dst must have equal length")
        for arr in (self.src, self.dst):
            if arr.size and (arr.min() < 0 or arr.max() >= self.n):
                raise ValidationError("matching index out of range")
            if np.unique(arr).size != arr.size:
                raise ValidationError("matching is not injective")
        order = np.argsort(self.src, kind="stable")
        self.src, self.dst = self.src[order], self.dst[order]

    @classmethod
    def from_permutation(cls, pi, meta=None) -> PartialMatching:
        pi = np.asarray(pi, dtype=np.int64)
        return cls(pi.size, np.arange(pi.size), pi, dict(meta or {}))

    @classmethod
    def empty(cls, n: int) -> PartialMatching:
        return cls(n, np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return int(self.src.size)

    @property
    def complete(self) -> bool:
        return len(self) == self.n

    def as_array(self) -> np.ndarray:
        """``out[i] = pi(i)`` with ``-1`` for unmatched ``i``."""
        out = np.full(self.n, -1, dtype=np.int64)
        out[self.src] = self.dst
        return out

    def restrict(self, vertices) -> PartialMatching:
        keep = np.isin(self.src, np.asarray(vertices))
        return PartialMatching(self.n, self.src[keep], self.dst[keep], dict(self.meta))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            for i, j in zip(self.src.tolist(), self.dst.tolist()):
                fh.write(f"{i} {j}\n")

    @classmethod
    def load(cls, path, n: int) -> PartialMatching:
        if not Path(path).read_text().strip():
            return cls.empty(n)
        data = np.loadtxt(path, dtype=np.int64, ndmin=2)
        return cls(n, data[:, 0], data[:, 1])


@dataclass(frozen=True)
class MatchMetrics:
    matched_fraction: float
    correct_fraction: float
    exact: bool


def evaluate(matching: PartialMatching, pi_star) -> MatchMetrics:
    """Correct fraction is 1.0 for an empty matching (vacuously correct)."""
    pi_star = np.asarray(pi_star)
    k = len(matching)
    correct = int(np.count_nonzero(pi_star[matching.src] == matching.dst))
    return MatchMetrics(
        matched_fraction=k / matching.n if matching.n else 0.0,
        correct_fraction=correct / k if k else 1.0,
        exact=bool(k == matching.n and correct == k),
    )


def threshold_match(scores, tau: float) -> PartialMatching:
    """Match ``i`` to ``j`` when ``j`` is the only column with score ``>= tau``.

    Targets claimed by more than one row are dropped for all claimants.
    """
    sc = np.asarray(getattr(scores, "scores", scores))
    if not np.all(np.isfinite(sc)):
        raise ValidationError("scores must be finite")
    n = sc.shape[0]
    hit = sc >= tau
    rows = np.flatnonzero(hit.sum(axis=1) == 1)
    cols = np.argmax(hit[rows], axis=1)
    claims = np.bincount(cols, minlength=sc.shape[1])
    keep = claims[cols] == 1
    return PartialMatching(n, rows[keep], cols[keep], {"tau": float(tau)})


def boost_gamma(params: ModelParams) -> float:
    """Root of ``h(gamma) = 3 ln n / ((n-2) p q s^2)``; infinite when ``s = 0``."""
    n, p, q, s = params.n, params.p, params.q, params.s
    if p * q * s == 0.0:
        return math.inf
    return solve_h(3.0 * math.log(n) / ((n - 2) * p * q * s * s))


def boost_threshold(params: ModelParams) -> float:
    """``gamma (p^2+q^2)/2 s^2 (n + 2 n^{3/4})``."""
    n, p, q, s = params.n, params.p, params.q, params.s
    gamma = boost_gamma(params)
    if math.isinf(gamma):
        return math.inf
    return gamma * (p * p + q * q) / 2.0 * s * s * (n + 2.0 * n**0.75)


def seeded_boost(
    g1: Graph, g2: Graph, seed_matching: PartialMatching, params: ModelParams, threshold: float | None = None
) -> PartialMatching:
    """Grow a (presumed correct) seed matching by common-neighbour counts.

    ``N(i, j)`` counts matched ``v`` with ``v ~ i`` in G1 and ``pi(v) ~ j`` in
    G2.  The table over unmatched rows and columns is built once and updated
    in ``O(deg_1(i) deg_2(j))`` per added pair.  Pairs that reach the
    threshold are processed first-in first-out; seed pairs are never changed.
    The result carries ``incomplete=True`` if vertices remain unmatched.
    """
    n = g1.n
    if g2.n != n or seed_matching.n != n:
        raise ValidationError("graphs and seed matching must share n")
    thr = boost_threshold(params) if threshold is None else float(threshold)
    cur = seed_matching.as_array()
    taken = np.zeros(n, dtype=bool)
    taken[seed_matching.dst] = True
    free_i = np.flatnonzero(cur < 0)
    free_j = np.flatnonzero(~taken)
    row_of = np.full(n, -1, dtype=np.int64)
    row_of[free_i] = np.arange(free_i.size)
    col_of = np.full(n, -1, dtype=np.int64)
    col_of[free_j] = np.arange(free_j.size)

    a1, a2 = g1.adjacency, g2.adjacency
    src, dst = seed_matching.src, seed_matching.dst
    if free_i.size and free_j.size and src.size:
        left = a1[free_i][:, src]
        right = a2[dst][:, free_j]
        counts = np.rint((left @ right).toarray()).astype(np.int64)
    else:
        counts = np.zeros((free_i.size, free_j.size), dtype=np.int64)

    queue = deque(zip(*np.nonzero(counts >= thr)))
    added = []
    while queue:
        r, c = queue.popleft()
        i, j = free_i[r], free_j[c]
        if cur[i] >= 0 or taken[j]:
            continue
        cur[i] = j
        taken[j] = True
        added.append((i, j))
        ni = row_of[g1.neighbors(i)]
        nj = col_of[g2.neighbors(j)]
        ni = ni[ni >= 0]
        nj = nj[nj >= 0]
        if ni.size and nj.size:
            block = counts[np.ix_(ni, nj)]
            crossed = (block < thr) & (block + 1 >= thr)
            counts[np.ix_(ni, nj)] = block + 1
            for rr, cc in zip(*np.nonzero(crossed)):
                queue.append((ni[rr], nj[cc]))

    matched = np.flatnonzero(cur >= 0)
    meta = dict(seed_matching.meta)
    meta.update(threshold=thr, seeds=len(seed_matching), added=len(added), incomplete=bool(matched.size < n))
    return PartialMatching(n, matched, cur[matched], meta)


def random_seed_matching(pi_star, fraction: float, gen: np.random.Generator) -> PartialMatching:
    """``pi*`` restricted to a uniform subset of ``round(fraction n)`` vertices."""
    pi_star = np.asarray(pi_star)
    n = pi_star.size
    k = int(round(fraction * n))
    idx = np.sort(gen.choice(n, size=k, replace=False))
    return PartialMatching(n, idx, pi_star[idx], {"seed_fraction": fraction})


def complete_arbitrarily(matching: PartialMatching) -> np.ndarray:
    """Extend to a permutation, pairing leftover rows and columns in sorted order."""
    cur = matching.as_array()
    free_j = np.setdiff1d(np.arange(matching.n), matching.dst)
    cur[cur < 0] = free_j
    return cur


# -- end-to-end ---------------------------------------------------------------


@dataclass
class PipelineOptions:
    oracle_labels: bool = False
    c: float = 0.5
    t: int | None = None
    tau_quantile: float | None = None
    seed: int = 0
    union_recovery: bool = True
    eps: float = 0.1
    out_dir: str | None = None


@dataclass
class PipelineResult:
    matching: PartialMatching
    metrics: MatchMetrics
    labels: community.LabelEstimate | None
    seed_matching: PartialMatching
    scores: ScoreMatrix
    stages: dict


def choose_tau(scores: ScoreMatrix, params: ModelParams, family, c: float, tau_quantile: float | None):
    if tau_quantile is not None:
        if not 0.0 <= tau_quantile <= 1.0:
            raise ValidationError("tau quantile must lie in [0, 1]")
        return float(np.quantile(scores.scores, tau_quantile)), "quantile"
    return c * mu_score(params, family), "c*mu"


def full_pipeline(inst: CorrelatedInstance, preset: Preset | str, options: PipelineOptions | None = None) -> PipelineResult:
    """Labels, centered matrices, colored scores, threshold, boost, union recovery."""
    opt = options or PipelineOptions()
    preset = get_preset(preset) if isinstance(preset, str) else preset
    prm = inst.params
    family = preset.family()
    stages: dict = {"preset": preset.name}

    if opt.oracle_labels:
        la, lb = inst.sigma_star, inst.sigma_star_b
        stages["labels"] = "oracle"
    elif prm.s == 0.0:
        # both graphs are empty: there is nothing to recover
        la = lb = np.ones(prm.n, dtype=np.int8)
        stages["labels"] = "constant"
    else:
        ea = community.recover_almost_exact(inst.g1, prm.s * prm.a, prm.s * prm.b, opt.eps, opt.seed)
        eb = community.recover_almost_exact(inst.g2, prm.s * prm.a, prm.s * prm.b, opt.eps, opt.seed + 1)
        la, lb = ea.labels, eb.labels
        stages["labels"] = "estimated"
        stages["label_error_a"] = community.error_fraction(la, inst.sigma_star)
        stages["label_error_b"] = community.error_fraction(lb, inst.sigma_star_b)

    ma, mb = centered_pair(inst, la, lb)
    scores = score_matrix_colored(ma, mb, family, opt.t, opt.seed)
    scores.meta.update(preset=preset.name)
    tau, tau_mode = choose_tau(scores, prm, family, opt.c, opt.tau_quantile)
    stages.update(tau=tau, tau_mode=tau_mode, mu=mu_score(prm, family))

    seeds = threshold_match(scores, tau)
    stages["seed_metrics"] = asdict(evaluate(seeds, inst.pi_star))
    if len(seeds):
        final = seeded_boost(inst.g1, inst.g2, seeds, prm)
    else:
        final = PartialMatching(prm.n, seeds.src, seeds.dst, dict(seeds.meta, incomplete=True))
    metrics = evaluate(final, inst.pi_star)
    stages["incomplete"] = bool(final.meta.get("incomplete", not final.complete))

    labels = None
    if opt.union_recovery and prm.s > 0.0:
        pi_hat = final.as_array() if final.complete else complete_arbitrarily(final)
        labels = community.recover_exact_on_union(inst, pi_hat, opt.eps, opt.seed)
        stages["union_error"] = community.error_fraction(labels.labels, inst.sigma_star)

    if opt.out_dir is not None:
        out = Path(opt.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        np.savetxt(out / "labels_a.txt", np.asarray(la), fmt="%d")
        np.savetxt(out / "labels_b.txt", np.asarray(lb), fmt="%d")
        scores.save(out / "scores.bin")
        seeds.save(out / "seed_matching.txt")
        final.save(out / "matching.txt")
        if labels is not None:
            np.savetxt(out / "labels_union.txt", labels.labels, fmt="%d")
        (out / "metrics.json").write_text(
            json.dumps({"metrics": asdict(metrics), "stages": stages}, indent=2, sort_keys=True, default=float) + "\n"
        )
    return PipelineResult(final, metrics, labels, seeds, scores, stages)
