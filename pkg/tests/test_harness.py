from __future__ import annotations

import csv
import io
import math

import numpy as np
import pytest
from scipy.stats import spearmanr

from csbm_match import harness
from csbm_match.errors import ValidationError
from csbm_match.model import OTTER_ALPHA, chernoff_hellinger

pytestmark = pytest.mark.filterwarnings("ignore::RuntimeWarning")


def small_spec(**kw) -> harness.SweepSpec:
    base = dict(a=(30.0,), b=(10.0,), s=(0.9,), n=(300,), trials=1, community=False, base_seed=4)
    base.update(kw)
    return harness.SweepSpec(**base)


def parse(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def test_spec_validation():
    with pytest.raises(ValidationError):
        small_spec(a=())
    with pytest.raises(ValidationError):
        small_spec(trials=0)
    with pytest.raises(ValidationError):
        small_spec(matcher="hungarian")
    with pytest.raises(ValidationError):
        small_spec(label_modes=("guess",))
    with pytest.raises(ValidationError):
        small_spec(seed_fraction=1.5)


def test_one_cell_one_row():
    spec = small_spec()
    rows = harness.run_sweep(spec, workers=1)
    text = harness.rows_to_csv(rows, spec.columns)
    lines = text.strip().split("\n")
    assert len(lines) == 2
    assert lines[0].split(",") == harness.SWEEP_COLUMNS
    assert rows[0]["status"] == "ok"


def test_s_zero_never_exact():
    spec = small_spec(s=(0.0,), trials=3, community=True)
    rows = harness.run_sweep(spec, workers=1)
    assert [r["exact"] for r in rows] == [False] * 3
    assert all(math.isnan(r["err_single"]) for r in rows)


def test_exact_rate_increases_with_s():
    # s^2 (a+b)/2 = 1 at s = 0.2; the grid runs from below it to s = 1
    s_grid = (0.15, 0.3, 0.6, 0.8, 0.9, 1.0)
    spec = harness.SweepSpec(a=(40.0,), b=(10.0,), s=s_grid, n=(2000,), trials=3, community=False, base_seed=5)
    rows = harness.run_sweep(spec, workers=1)
    rate = {s: np.mean([r["exact"] for r in rows if r["s"] == s]) for s in s_grid}
    rho = spearmanr(list(rate.keys()), list(rate.values())).statistic
    assert rho > 0
    assert rate[0.15] == 0.0 and rate[1.0] == 1.0


def test_rows_are_deterministic_and_ordered():
    spec = small_spec(s=(0.0, 0.9), trials=2)
    a = harness.rows_to_csv(harness.run_sweep(spec, workers=1), spec.columns)
    b = harness.rows_to_csv(harness.run_sweep(spec, workers=1), spec.columns)
    assert a == b
    keys = [(int(r["cell"]), int(r["trial"])) for r in parse(a)]
    assert keys == sorted(keys)
    assert len({r["seed"] for r in parse(a)}) == 4


def test_parallel_matches_serial():
    spec = small_spec(s=(0.5, 0.9), trials=2)
    serial = harness.rows_to_csv(harness.run_sweep(spec, workers=1), spec.columns)
    pooled = harness.rows_to_csv(harness.run_sweep(spec, workers=2), spec.columns)
    assert serial == pooled


def test_derived_columns_recompute_exactly():
    spec = small_spec(a=(30.0, 12.0), b=(10.0, 3.0), s=(0.6, 0.95))
    for row in parse(harness.rows_to_csv(harness.run_sweep(spec, workers=1), spec.columns)):
        a, b, s = float(row["a"]), float(row["b"]), float(row["s"])
        d = chernoff_hellinger(a, b)
        assert float(row["s2_mean_deg"]) == s * s * (a + b) / 2.0
        assert float(row["s_dplus"]) == s * d
        assert float(row["s2ms_dplus"]) == s * (2.0 - s) * d
        assert float(row["s2"]) == s * s
        assert float(row["alpha"]) == OTTER_ALPHA
        assert row["above_alpha"] == ("1" if s * s > OTTER_ALPHA else "0")


def test_wall_time_only_on_request():
    assert "wall_time" not in small_spec().columns
    spec = small_spec(record_wall_time=True)
    rows = harness.run_sweep(spec, workers=1)
    assert spec.columns[-1] == "wall_time" and rows[0]["wall_time"] > 0


def test_failed_cell_is_recorded():
    # p = a ln n / n exceeds 1 here, which the model rejects
    spec = small_spec(a=(400.0,), n=(50,))
    rows = harness.run_sweep(spec, workers=1)
    assert rows[0]["status"].startswith("error: ValidationError")


def test_output_file_written(tmp_path):
    out = tmp_path / "sub" / "sweep.csv"
    spec = small_spec(output=str(out))
    rows = harness.run_sweep(spec, workers=1)
    assert out.read_text() == harness.rows_to_csv(rows, spec.columns)


def test_thread_count_env(monkeypatch):
    monkeypatch.delenv(harness.THREADS_ENV, raising=False)
    assert harness.thread_count() == 1
    monkeypatch.setenv(harness.THREADS_ENV, "3")
    assert harness.thread_count() == 3
    monkeypatch.setenv(harness.THREADS_ENV, "many")
    with pytest.raises(ValidationError):
        harness.thread_count()


def test_config_parsing_and_override(tmp_path):
    text = "a = 30, 40  # assortative\nb = 10\ns = 0.5,0.9\nn = 600\ntrials = 2\nseed = 13\ncommunity = no\n"
    cfg = harness.parse_config_text(text)
    assert cfg == {
        "a": (30.0, 40.0),
        "b": (10.0,),
        "s": (0.5, 0.9),
        "n": (600,),
        "trials": 2,
        "base_seed": 13,
        "community": False,
    }
    path = tmp_path / "sweep.ini"
    path.write_text(text)
    spec = harness.merged_spec(harness.load_config(path), {"trials": 5, "s": None})
    assert spec.trials == 5 and spec.s == (0.5, 0.9)
    with pytest.raises(ValidationError):
        harness.parse_config_text("colour = blue\n")
    with pytest.raises(ValidationError):
        harness.spec_from_mapping({"a": (1.0,)})


def test_theory_feasible_band_at_s_06():
    rows = harness.emit_theory_curves([20.0], s_fixed=0.6)
    assert rows[0]["above_alpha"]
    rows = harness.emit_theory_curves([20.0, 40.0], b_fixed=5.0)
    for r in rows:
        assert r["s_alpha"] == pytest.approx(math.sqrt(OTTER_ALPHA))
        assert r["s_match"] <= 0.6 and r["feasible_band"]


def test_theory_er_line_flag():
    rows = harness.emit_theory_curves([3.0, 5.0, 8.0], b_fixed=5.0)
    assert [r["er_line"] for r in rows] == [False, True, False]
    assert rows[1]["s_community"] == math.inf


def test_theory_matching_boundary_at_s_08():
    r = harness.emit_theory_curves([1.0], s_fixed=0.8)[0]
    assert r["a_plus_b"] == pytest.approx(3.125, abs=1e-12)
    assert r["b_boundary"] == pytest.approx(2.125, abs=1e-12)


def test_theory_boundaries_are_consistent():
    for r in harness.emit_theory_curves(np.linspace(10, 60, 11), b_fixed=2.0):
        d = chernoff_hellinger(r["a"], r["b"])
        assert r["s_match"] ** 2 * (r["a"] + r["b"]) / 2 == pytest.approx(1.0)
        if math.isfinite(r["s_community"]):
            assert r["s_community"] * d == pytest.approx(1.0)
        if math.isfinite(r["s_union"]):
            s = r["s_union"]
            assert s * (2 - s) * d == pytest.approx(1.0)
            assert s <= r["s_community"]


def test_theory_needs_one_axis():
    with pytest.raises(ValidationError):
        harness.emit_theory_curves([1.0])
    with pytest.raises(ValidationError):
        harness.emit_theory_curves([1.0], b_fixed=1.0, s_fixed=0.5)
    assert harness.theory_csv([]) == ""
