"""Parameter sweeps over (n, a, b, s) and theory boundary curves, written as CSV."""

from __future__ import annotations

import configparser
import csv
import io
import itertools
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

from . import community
from . import rng as rngmod
from .chandelier import get_preset
from .errors import ValidationError
from .matching import (
    PipelineOptions,
    complete_arbitrarily,
    evaluate,
    full_pipeline,
    random_seed_matching,
    seeded_boost,
)
from .model import OTTER_ALPHA, ModelParams, chernoff_hellinger, generate_csbm

THREADS_ENV = "CSBM_THREADS"
LABEL_MODES = ("oracle", "estimated")
MATCHERS = ("seeded", "pipeline")

SWEEP_COLUMNS = [
    "cell",
    "trial",
    "seed",
    "n",
    "a",
    "b",
    "s",
    "label_mode",
    "matcher",
    "s2_mean_deg",
    "s_dplus",
    "s2ms_dplus",
    "s2",
    "alpha",
    "above_alpha",
    "seed_matched_fraction",
    "matched_fraction",
    "correct_fraction",
    "exact",
    "err_single",
    "err_union",
    "status",
]


@dataclass(frozen=True)
class SweepSpec:
    a: tuple[float, ...]
    b: tuple[float, ...]
    s: tuple[float, ...]
    n: tuple[int, ...]
    trials: int = 1
    preset: str = "tiny"
    label_modes: tuple[str, ...] = ("oracle",)
    matcher: str = "seeded"
    seed_fraction: float = 0.95
    base_seed: int = 0
    eps: float = 0.1
    community: bool = True
    record_wall_time: bool = False
    output: str | None = None

    def __post_init__(self):
        for name in ("a", "b", "s", "n", "label_modes"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValidationError(f"grid {name!r} must be non-empty")
            object.__setattr__(self, name, vals)
        object.__setattr__(self, "n", tuple(int(x) for x in self.n))
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if self.matcher not in MATCHERS:
            raise ValidationError(f"matcher must be one of {MATCHERS}")
        bad = set(self.label_modes) - set(LABEL_MODES)
        if bad:
            raise ValidationError(f"unknown label modes {sorted(bad)}")
        if not 0.0 <= self.seed_fraction <= 1.0:
            raise ValidationError("seed_fraction must lie in [0, 1]")
        get_preset(self.preset)

    def cells(self) -> list[tuple]:
        return list(itertools.product(self.n, self.a, self.b, self.s, self.label_modes))

    @property
    def columns(self) -> list[str]:
        return SWEEP_COLUMNS + (["wall_time"] if self.record_wall_time else [])


def threshold_columns(a: float, b: float, s: float) -> dict:
    """Reference quantities that place a cell in the phase diagram."""
    d = chernoff_hellinger(a, b)
    return {
        "s2_mean_deg": s * s * (a + b) / 2.0,
        "s_dplus": s * d,
        "s2ms_dplus": s * (2.0 - s) * d,
        "s2": s * s,
        "alpha": OTTER_ALPHA,
        "above_alpha": s * s > OTTER_ALPHA,
    }


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    return str(v)


def run_trial(spec: SweepSpec, cell_index: int, trial: int) -> dict:
    n, a, b, s, mode = spec.cells()[cell_index]
    seed = rngmod.derive_seed(spec.base_seed, cell_index, trial)
    row = {
        "cell": cell_index,
        "trial": trial,
        "seed": seed,
        "n": n,
        "a": float(a),
        "b": float(b),
        "s": float(s),
        "label_mode": mode,
        "matcher": spec.matcher,
    }
    row.update(threshold_columns(float(a), float(b), float(s)))
    empty = {k: float("nan") for k in ("seed_matched_fraction", "matched_fraction", "correct_fraction")}
    row.update(empty, exact=False, err_single=float("nan"), err_union=float("nan"))
    start = time.perf_counter()
    try:
        prm = ModelParams(n, float(a), float(b), float(s), seed)
        inst = generate_csbm(prm)
        if spec.matcher == "seeded":
            seeds = random_seed_matching(inst.pi_star, spec.seed_fraction, rngmod.stream(seed, "seedset"))
            final = seeded_boost(inst.g1, inst.g2, seeds, prm)
        else:
            opts = PipelineOptions(oracle_labels=(mode == "oracle"), seed=seed, union_recovery=False, eps=spec.eps)
            res = full_pipeline(inst, spec.preset, opts)
            seeds, final = res.seed_matching, res.matching
        row["seed_matched_fraction"] = len(seeds) / n
        met = evaluate(final, inst.pi_star)
        row.update(matched_fraction=met.matched_fraction, correct_fraction=met.correct_fraction, exact=met.exact)
        if spec.community and a != b and s > 0:
            single = community.recover_single(inst, 1, spec.eps, seed)
            row["err_single"] = community.error_fraction(single.labels, inst.sigma_star)
            pi_hat = final.as_array() if final.complete else complete_arbitrarily(final)
            union = community.recover_exact_on_union(inst, pi_hat, spec.eps, seed)
            row["err_union"] = community.error_fraction(union.labels, inst.sigma_star)
        row["status"] = "ok"
    except Exception as exc:  # a failed cell is recorded, never fatal
        row["status"] = f"error: {type(exc).__name__}: {exc}".replace("\n", " ")
    if spec.record_wall_time:
        row["wall_time"] = time.perf_counter() - start
    return row


def _run_trial_args(args):
    return run_trial(*args)


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[dict]:
    """One row per (cell, trial), in (cell, trial) order regardless of scheduling."""
    jobs = [(spec, c, t) for c in range(len(spec.cells())) for t in range(spec.trials)]
    workers = thread_count() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        rows = [run_trial(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_trial_args, jobs))
    if spec.output:
        write_csv(spec.output, rows, spec.columns)
    return rows


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def write_csv(path, rows: list[dict], columns: list[str]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows, columns))


# -- theory curves ------------------------------------------------------------


def emit_theory_curves(a_values, b_fixed: float | None = None, s_fixed: float | None = None) -> list[dict]:
    """Boundary loci for overlaying on sweep results.

    With ``b_fixed`` each row gives, for one ``a``, the critical ``s`` of the
    matching threshold ``s^2 (a+b)/2 = 1``, of single-graph recovery
    ``s D+ = 1``, of union-graph recovery ``s (2-s) D+ = 1`` and of the
    correlation condition ``s^2 = alpha``.  With ``s_fixed`` each row gives
    the ``b`` on the matching boundary ``a + b = 2/s^2``.  Rows with ``a = b``
    are flagged as the Erdos-Renyi line.
    """
    if (b_fixed is None) == (s_fixed is None):
        raise ValidationError("give exactly one of b_fixed or s_fixed")
    rows = []
    s_alpha = math.sqrt(OTTER_ALPHA)
    for a in a_values:
        a = float(a)
        if b_fixed is not None:
            b = float(b_fixed)
            d = chernoff_hellinger(a, b)
            s_match = math.sqrt(2.0 / (a + b))
            s_comm = 1.0 / d if d > 0 else math.inf
            s_union = 1.0 - math.sqrt(1.0 - 1.0 / d) if d >= 1 else math.inf
            lo = max(s_match, s_alpha)
            rows.append(
                {
                    "a": a,
                    "b": b,
                    "s_match": s_match,
                    "s_community": s_comm,
                    "s_union": s_union,
                    "s_alpha": s_alpha,
                    "feasible_band": lo <= 1.0,
                    "er_line": a == b,
                }
            )
        else:
            s = float(s_fixed)
            total = 2.0 / (s * s) if s > 0 else math.inf
            rows.append(
                {
                    "a": a,
                    "s": s,
                    "a_plus_b": total,
                    "b_boundary": total - a,
                    "above_alpha": s * s > OTTER_ALPHA,
                    "er_line": math.isclose(a, total - a),
                }
            )
    return rows


def theory_csv(rows: list[dict]) -> str:
    return rows_to_csv(rows, list(rows[0].keys())) if rows else ""


# -- configuration ------------------------------------------------------------

_LIST_KEYS = {"a": float, "b": float, "s": float, "n": int, "label_modes": str}
_SCALAR_KEYS = {
    "trials": int,
    "preset": str,
    "matcher": str,
    "seed_fraction": float,
    "base_seed": int,
    "seed": int,
    "eps": float,
    "community": lambda x: x.strip().lower() in ("1", "true", "yes", "on"),
    "record_wall_time": lambda x: x.strip().lower() in ("1", "true", "yes", "on"),
    "output": str,
}


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; lists are comma separated; ``#`` comments."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string("[sweep]\n" + text)
    out = {}
    for key, raw in cp["sweep"].items():
        if key in _LIST_KEYS:
            conv = _LIST_KEYS[key]
            out[key] = tuple(conv(x.strip()) for x in raw.split(",") if x.strip())
        elif key in _SCALAR_KEYS:
            out[key] = _SCALAR_KEYS[key](raw.strip())
        else:
            raise ValidationError(f"unknown config key {key!r}")
    if "seed" in out:
        out["base_seed"] = out.pop("seed")
    return out


def load_config(path) -> dict:
    return parse_config_text(Path(path).read_text())


def spec_from_mapping(values: dict) -> SweepSpec:
    allowed = {f.name for f in fields(SweepSpec)}
    unknown = set(values) - allowed
    if unknown:
        raise ValidationError(f"unknown sweep settings {sorted(unknown)}")
    missing = [k for k in ("a", "b", "s", "n") if k not in values]
    if missing:
        raise ValidationError(f"sweep needs grids for {missing}")
    return SweepSpec(**values)


def merged_spec(base: dict, overrides: dict) -> SweepSpec:
    vals = dict(base)
    vals.update({k: v for k, v in overrides.items() if v is not None})
    return spec_from_mapping(vals)

