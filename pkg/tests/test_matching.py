from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csbm_match import rng as rngmod
from csbm_match.chandelier import get_preset
from csbm_match.counting import ScoreMatrix, centered_pair, score_matrix_colored
from csbm_match.errors import ValidationError
from csbm_match.graph import Graph
from csbm_match.matching import (
    PartialMatching,
    PipelineOptions,
    boost_gamma,
    boost_threshold,
    complete_arbitrarily,
    evaluate,
    full_pipeline,
    random_seed_matching,
    seeded_boost,
    threshold_match,
)
from csbm_match.model import ModelParams, generate_csbm, h


# -- PartialMatching / evaluate -----------------------------------------------


def test_partial_matching_validation():
    with pytest.raises(ValidationError):
        PartialMatching(3, [0, 1], [2, 2])
    with pytest.raises(ValidationError):
        PartialMatching(3, [0, 0], [1, 2])
    with pytest.raises(ValidationError):
        PartialMatching(3, [0], [3])
    m = PartialMatching(4, [2, 0], [1, 3])
    assert m.src.tolist() == [0, 2] and m.as_array().tolist() == [3, -1, 1, -1]
    assert len(m.restrict([2])) == 1


def test_matching_file_roundtrip(tmp_path):
    m = PartialMatching(5, [4, 1], [0, 2])
    m.save(tmp_path / "m.txt")
    assert (tmp_path / "m.txt").read_text() == "1 2\n4 0\n"
    back = PartialMatching.load(tmp_path / "m.txt", 5)
    assert back.src.tolist() == [1, 4] and back.dst.tolist() == [2, 0]
    (tmp_path / "e.txt").write_text("")
    assert len(PartialMatching.load(tmp_path / "e.txt", 5)) == 0


def test_evaluate_examples():
    pi = np.random.default_rng(0).permutation(200)
    m = evaluate(PartialMatching.from_permutation(pi), pi)
    assert (m.matched_fraction, m.correct_fraction, m.exact) == (1.0, 1.0, True)
    m = evaluate(PartialMatching.empty(200), pi)
    assert (m.matched_fraction, m.correct_fraction, m.exact) == (0.0, 1.0, False)
    src = np.arange(100)
    dst = pi[src].copy()
    dst[:10] = np.roll(dst[:10], 1)
    m = evaluate(PartialMatching(200, src, dst), pi)
    assert (m.matched_fraction, m.correct_fraction, m.exact) == (0.5, 0.9, False)


# -- threshold ----------------------------------------------------------------


def test_threshold_examples():
    sc = np.zeros((6, 6))
    assert len(threshold_match(sc, 1.0)) == 0
    diag = 10 * np.eye(6)
    m = threshold_match(ScoreMatrix(diag), 5.0)
    assert m.complete and evaluate(m, np.arange(6)).exact


def test_threshold_drops_collisions_and_multi_hits():
    sc = np.array([[9.0, 0, 0], [9.0, 0, 0], [0, 9.0, 9.0]])
    m = threshold_match(sc, 5.0)
    assert len(m) == 0
    with pytest.raises(ValidationError):
        threshold_match(np.array([[np.nan]]), 0.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 12))
def test_threshold_injective_and_rowwise_unique(seed, n):
    sc = np.random.default_rng(seed).normal(size=(n, n))
    tau = float(np.quantile(sc, 0.8))
    m = threshold_match(sc, tau)
    assert np.unique(m.dst).size == len(m)
    for i, j in zip(m.src, m.dst):
        assert np.flatnonzero(sc[i] >= tau).tolist() == [j]


def test_threshold_monotone_in_tau():
    # past the off-diagonal bulk, raising tau only removes rows
    gen = np.random.default_rng(1)
    sc = gen.normal(size=(60, 60)) + 6 * np.eye(60)
    sizes = [len(threshold_match(sc, t)) for t in np.linspace(4.5, 12, 20)]
    assert all(a >= b for a, b in zip(sizes, sizes[1:]))


# -- boost ----------------------------------------------------------------------


def test_gamma_roundtrip():
    prm = ModelParams(2000, 40, 10, 0.9)
    target = 3 * math.log(2000) / (1998 * prm.p * prm.q * 0.81)
    g = boost_gamma(prm)
    assert abs(h(g) - target) <= 1e-10
    assert boost_threshold(prm) == pytest.approx(g * (prm.p**2 + prm.q**2) / 2 * 0.81 * (2000 + 2 * 2000**0.75))
    assert math.isinf(boost_threshold(ModelParams(100, 4, 1, 0.0)))


def test_full_seed_returns_pi_star():
    prm = ModelParams(500, 20, 5, 0.9, 1)
    inst = generate_csbm(prm)
    full = PartialMatching.from_permutation(inst.pi_star)
    out = seeded_boost(inst.g1, inst.g2, full, prm)
    assert np.array_equal(out.as_array(), inst.pi_star)
    assert out.meta["added"] == 0 and not out.meta["incomplete"]


def test_boost_never_changes_seed_pairs():
    prm = ModelParams(800, 30, 8, 0.9, 2)
    inst = generate_csbm(prm)
    gen = np.random.default_rng(0)
    seeds = random_seed_matching(inst.pi_star, 0.6, gen)
    # corrupt a few seed pairs: they must survive untouched
    dst = seeds.dst.copy()
    dst[:5] = np.roll(dst[:5], 1)
    bad = PartialMatching(prm.n, seeds.src, dst)
    out = seeded_boost(inst.g1, inst.g2, bad, prm)
    arr = out.as_array()
    assert np.array_equal(arr[bad.src], bad.dst)
    assert np.unique(out.dst).size == len(out)


def test_boost_reports_incomplete():
    g = Graph.empty(50)
    prm = ModelParams(50, 2, 1, 0.5)
    seeds = PartialMatching(50, np.arange(10), np.arange(10))
    out = seeded_boost(g, g, seeds, prm)
    assert out.meta["incomplete"] and len(out) == 10


def test_boost_exact_in_easy_regime():
    prm = ModelParams(1500, 40, 10, 0.9, 3)
    inst = generate_csbm(prm)
    seeds = random_seed_matching(inst.pi_star, 0.95, rngmod.stream(3, "seedset"))
    out = seeded_boost(inst.g1, inst.g2, seeds, prm)
    assert evaluate(out, inst.pi_star).exact


def test_common_neighbour_law():
    # fake cross-community pairs (u, pi*(v)), u != v: N ~ Bin(n-2, p q s^2)
    prm = ModelParams(3000, 30, 10, 0.8, 4)
    inst = generate_csbm(prm)
    gen = np.random.default_rng(5)
    lab = inst.sigma_star
    a1 = inst.g1.adjacency
    a2 = inst.g2.adjacency[inst.pi_star][:, inst.pi_star]  # G2 in G1 ids
    vals = []
    while len(vals) < 10_000:
        u, v = gen.integers(0, prm.n, size=2)
        if u == v or lab[u] == lab[v]:
            continue
        vals.append(a1[u].multiply(a2[v]).sum())
    vals = np.asarray(vals, dtype=float)
    expect = (prm.n - 2) * prm.p * prm.q * prm.s**2
    assert abs(vals.mean() - expect) <= 3 * vals.std(ddof=1) / math.sqrt(vals.size)


def test_random_seed_matching_and_completion():
    pi = np.random.default_rng(6).permutation(40)
    seeds = random_seed_matching(pi, 0.5, np.random.default_rng(7))
    assert len(seeds) == 20 and evaluate(seeds, pi).correct_fraction == 1.0
    full = complete_arbitrarily(seeds)
    assert np.array_equal(np.sort(full), np.arange(40))
    assert np.array_equal(full[seeds.src], seeds.dst)


# -- scores and pipeline -------------------------------------------------------


def test_true_pairs_score_above_fake_on_average():
    # positive mean gap between true and fake pairs (the gap is not many
    # standard deviations with a single-member family; see the xfail below)
    prm = ModelParams(200, 25, 5, 0.95, 8)
    inst = generate_csbm(prm)
    ma, mb = centered_pair(inst)
    sc = score_matrix_colored(ma, mb, get_preset("tiny").family(), seed=8)
    true = sc.true_pair_scores(inst.pi_star)
    mask = np.ones((prm.n, prm.n), dtype=bool)
    mask[np.arange(prm.n), inst.pi_star] = False
    assert true.mean() > sc.scores[mask].mean()


@pytest.mark.xfail(strict=True, reason="tiny preset has a single chandelier, so scores form a rank-1 matrix")
def test_score_gap_five_fake_std():
    prm = ModelParams(200, 25, 5, 0.95, 9)
    inst = generate_csbm(prm)
    ma, mb = centered_pair(inst)
    sc = score_matrix_colored(ma, mb, get_preset("tiny").family(), seed=9)
    true = sc.true_pair_scores(inst.pi_star)
    mask = np.ones((prm.n, prm.n), dtype=bool)
    mask[np.arange(prm.n), inst.pi_star] = False
    fake = sc.scores[mask]
    assert true.mean() - fake.mean() >= 5 * fake.std()


def test_tiny_preset_scores_are_rank_one():
    prm = ModelParams(150, 25, 5, 0.95, 10)
    inst = generate_csbm(prm)
    ma, mb = centered_pair(inst)
    sc = score_matrix_colored(ma, mb, get_preset("tiny").family(), seed=10).scores
    sv = np.linalg.svd(sc, compute_uv=False)
    assert sv[1] <= 1e-9 * sv[0]


def test_pipeline_s_zero_not_exact(tmp_path):
    prm = ModelParams(80, 12, 3, 0.0, 11)
    inst = generate_csbm(prm)
    res = full_pipeline(inst, "tiny", PipelineOptions(oracle_labels=True, seed=1, out_dir=str(tmp_path)))
    assert not res.metrics.exact
    assert res.stages["mu"] == 0.0
    for name in ("labels_a.txt", "labels_b.txt", "scores.bin", "seed_matching.txt", "matching.txt", "metrics.json"):
        assert (tmp_path / name).exists()
    meta = json.loads((tmp_path / "metrics.json").read_text())
    assert meta["stages"]["labels"] == "oracle"


def test_pipeline_estimated_equals_oracle_when_labels_exact():
    # at this signal level recovery is exact, so the centered matrices and
    # the colored scores coincide bitwise with the oracle-label run
    prm = ModelParams(500, 40, 4, 1.0, 12)
    inst = generate_csbm(prm)
    opts = dict(seed=3, t=4, union_recovery=False)
    est = full_pipeline(inst, "tiny", PipelineOptions(oracle_labels=False, **opts))
    assert est.stages["label_error_a"] == 0.0 and est.stages["label_error_b"] == 0.0
    orc = full_pipeline(inst, "tiny", PipelineOptions(oracle_labels=True, **opts))
    assert np.array_equal(est.scores.scores, orc.scores.scores)


def test_pipeline_tau_quantile():
    prm = ModelParams(80, 12, 3, 0.9, 13)
    inst = generate_csbm(prm)
    res = full_pipeline(inst, "tiny", PipelineOptions(oracle_labels=True, tau_quantile=0.999, t=2, union_recovery=False))
    assert res.stages["tau_mode"] == "quantile"
    assert res.stages["tau"] == pytest.approx(np.quantile(res.scores.scores, 0.999))
    with pytest.raises(ValidationError):
        full_pipeline(inst, "tiny", PipelineOptions(oracle_labels=True, tau_quantile=1.5, t=1))


@pytest.mark.xfail(strict=True, reason="tiny preset has a single chandelier, so scores form a rank-1 matrix")
def test_pipeline_oracle_labels_exact_at_s_one():
    exact = 0
    for seed in range(3):
        prm = ModelParams(200, 25, 5, 1.0, seed)
        inst = generate_csbm(prm)
        res = full_pipeline(inst, "tiny", PipelineOptions(oracle_labels=True, seed=seed, union_recovery=False))
        exact += res.metrics.exact
    assert exact >= 3
