from __future__ import annotations

import math

import numpy as np
import pytest

from csbm_match import oracle, treegen
from csbm_match.chandelier import (
    PRESETS,
    assemble,
    build_family,
    dp_feasible,
    get_preset,
    implied_constants,
)
from csbm_match.errors import ValidationError
from csbm_match.model import ModelParams
from csbm_match.treegen import RootedTree, build_catalog

PATH2 = RootedTree.from_levels([0, 1, 2])
STAR2 = RootedTree.from_levels([0, 1, 1])
EDGE = RootedTree.from_levels([0, 1])


def test_family_sizes():
    cat4 = build_catalog(3)  # 4 trees
    assert build_family(cat4, 2, 1).family_size == 6
    assert build_family(cat4, 4, 1).family_size == 1
    with pytest.raises(ValidationError):
        build_family(cat4, 5, 1)
    with pytest.raises(ValidationError):
        build_family(cat4, 2, 0)


def test_tiny_preset_single_member():
    fam = build_family(build_catalog(2), 2, 1)
    (member,) = list(fam)
    assert fam.N == 6 and member.as_tree.k_edges == 6
    assert member.aut == 2 == oracle.brute_aut(member.as_tree)


def test_single_edge_bulb_gives_path():
    t = assemble([EDGE], 1)
    assert t.level_seq == (0, 1, 2)
    assert t.aut == 1


def test_two_wire_example():
    t = assemble([PATH2, STAR2], 2)
    assert t.k_edges == 8
    assert t.aut == 2 == oracle.brute_aut(t)


def test_product_rule_and_shape():
    fam = build_family(build_catalog(4), 3, 2)
    for c in fam.random_members(40, np.random.default_rng(1)):
        assert c.aut == math.prod(fam.bulbs[i].aut for i in c.bulb_ids)
        assert treegen.aut_count(c.as_tree) == c.aut
        assert c.n_edges == fam.N == 3 * (4 + 2)
        assert list(c.bulb_ids) == sorted(set(c.bulb_ids))
        # root has degree L
        assert c.as_tree.level_seq.count(1) == 3


def test_members_pairwise_non_isomorphic():
    for K in (2, 3, 4):
        cat = build_catalog(K)
        if len(cat) > 6:
            cat = treegen.BulbCatalog(cat.trees[:6], K, None, None)
        for L in range(1, len(cat) + 1):
            fam = build_family(cat, L, 1)
            seqs = [c.as_tree.level_seq for c in fam]
            assert len(seqs) == len(set(seqs)) == fam.family_size


def test_iteration_is_lexicographic():
    fam = build_family(build_catalog(3), 2, 1)
    ids = [c.bulb_ids for c in fam]
    assert ids == sorted(ids)
    assert ids[0] == (0, 1)


def test_max_degree_bound():
    fam = build_family(build_catalog(4, D=3), 2, 1)
    for c in fam:
        # root L, wires 2, bulbs <= D + 1 at the attachment vertex
        assert c.as_tree.max_deg <= max(fam.L, 2, 3 + 1)


def test_presets():
    assert {k: p.N for k, p in PRESETS.items()} == {"tiny": 6, "small": 8, "medium": 15}
    for p in PRESETS.values():
        assert dp_feasible(p.N)
    assert not dp_feasible(16)
    assert get_preset("small").family().family_size == math.comb(4, 2)
    with pytest.raises(ValidationError):
        get_preset("huge")


def test_dp_cost_formula():
    fam = get_preset("tiny").family()
    assert fam.dp_cost(100) == 1 * 6 * 3**6 * 100**2


def test_implied_constants_documentation():
    c = implied_constants(get_preset("tiny"), ModelParams(1000, 25, 5, 0.9))
    assert c["eps"] == pytest.approx(0.81 - 0.3383219)
    assert c["C1"] == pytest.approx(2 * c["eps"])
    assert c["C2"] == pytest.approx(2 / math.log(1000))
    assert math.isinf(c["C4"]) and math.isinf(c["C5"])
