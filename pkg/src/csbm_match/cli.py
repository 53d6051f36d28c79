"""Command-line entry point ``csbm``.

Exit status: 0 on success, 2 on invalid input, 3 when a size guard trips.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import community, harness, treegen
from .chandelier import Preset, dp_feasible, get_preset, implied_constants
from .counting import centered_pair, mu_score, score_matrix_colored, score_matrix_exact
from .errors import CapacityError, ValidationError
from .matching import PartialMatching, PipelineOptions, evaluate, full_pipeline, seeded_boost
from .model import ModelParams, generate_csbm, load_instance, read_edges, save_instance
from .verify import run_suites


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _optional_int(text: str) -> int | None:
    return None if text.lower() in ("inf", "none") else int(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=lambda x: x.item() if hasattr(x, "item") else str(x))


# -- handlers -------------------------------------------------------------------


def cmd_gen(args) -> int:
    prm = ModelParams(args.n, args.a, args.b, args.s, args.seed)
    inst = generate_csbm(prm)
    save_instance(inst, args.out)
    print(f"wrote {args.out}: n={prm.n} m1={inst.g1.m} m2={inst.g2.m} balanced={inst.balanced}")
    return 0


def cmd_trees(args) -> int:
    cat = treegen.build_catalog(args.edges, args.max_aut, args.max_deg)
    if args.count_only:
        print(_dump(cat.counts))
        return 0
    text = cat.to_text()
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(cat)} trees to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _preset_from_args(args) -> Preset:
    if args.preset:
        return get_preset(args.preset)
    if None in (args.K, args.L, args.M):
        raise ValidationError("give --preset or all of --K --L --M")
    return Preset("custom", args.K, args.L, args.M, args.R, args.D)


def cmd_family(args) -> int:
    preset = _preset_from_args(args)
    fam = preset.family()
    info = {
        "preset": preset.name,
        "K": preset.K,
        "L": preset.L,
        "M": preset.M,
        "R": preset.R,
        "D": preset.D,
        "catalog_size": len(fam.bulbs),
        "family_size": fam.family_size,
        "N": fam.N,
        "dp_feasible": dp_feasible(fam.N),
        "dp_cost": fam.dp_cost(args.n),
        "n": args.n,
    }
    if args.a is not None and args.b is not None and args.s is not None:
        prm = ModelParams(args.n, args.a, args.b, args.s)
        info["implied_constants"] = implied_constants(preset, prm)
        info["mu"] = mu_score(prm, fam)
    print(_dump(info))
    return 0


def cmd_communities(args) -> int:
    g = read_edges(args.graph)
    est = community.recover_almost_exact(g, args.a, args.b, args.eps, args.seed, args.m)
    if args.exact:
        labels, sweeps = community.majority_sweeps(g, est.labels, args.a, args.b)
        est = community.LabelEstimate(labels, "exact", dict(est.info, sweeps=sweeps))
    out = {"labels": est.labels.tolist(), "method": est.method, "info": est.info}
    if args.sigma:
        sigma = np.loadtxt(args.sigma, dtype=np.int64, ndmin=1)
        d = community.diagnose(g, est.labels, sigma, args.a, args.b, args.eps)
        out.update(
            error_fraction=d.error_fraction,
            bad_set_size=d.bad_set_size,
            errors=d.errors,
            errors_in_bad_set=d.errors_in_bad_set,
        )
    text = _dump(out)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def _labels_for(inst, centering: str, eps: float, seed: int):
    if centering == "true":
        return inst.sigma_star, inst.sigma_star_b
    prm = inst.params
    ea = community.recover_almost_exact(inst.g1, prm.s * prm.a, prm.s * prm.b, eps, seed)
    eb = community.recover_almost_exact(inst.g2, prm.s * prm.a, prm.s * prm.b, eps, seed + 1)
    return ea.labels, eb.labels


def cmd_score(args) -> int:
    inst = load_instance(args.instance)
    preset = get_preset(args.preset)
    fam = preset.family()
    la, lb = _labels_for(inst, args.centering, args.eps, args.seed)
    ma, mb = centered_pair(inst, la, lb)
    if args.mode == "exact":
        sc = score_matrix_exact(ma, mb, fam)
    else:
        if not dp_feasible(fam.N):
            raise CapacityError(f"color-coding DP with N={fam.N} exceeds the feasibility guard")
        sc = score_matrix_colored(ma, mb, fam, args.t, args.seed)
    sc.meta.update(n=inst.n, preset=preset.name, mode=args.mode, seed=args.seed)
    sc.save(args.out)
    print(f"wrote {args.out}: {inst.n}x{inst.n} scores ({args.mode}, centering={args.centering})")
    return 0


def cmd_match_run(args) -> int:
    inst = load_instance(args.instance)
    opts = PipelineOptions(
        oracle_labels=args.oracle_labels,
        c=args.c,
        t=args.t,
        tau_quantile=args.tau_quantile,
        seed=args.seed,
        union_recovery=not args.no_union,
        eps=args.eps,
        out_dir=args.out,
    )
    res = full_pipeline(inst, args.preset, opts)
    print(_dump({"metrics": asdict(res.metrics), "stages": res.stages}))
    return 0


def cmd_match_boost(args) -> int:
    inst = load_instance(args.instance)
    seeds = PartialMatching.load(args.seed_matching, inst.n)
    final = seeded_boost(inst.g1, inst.g2, seeds, inst.params)
    met = evaluate(final, inst.pi_star)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    final.save(out / "matching.txt")
    payload = {"metrics": asdict(met), "boost": final.meta}
    (out / "metrics.json").write_text(_dump(payload) + "\n")
    print(_dump(payload))
    return 0


def cmd_sweep(args) -> int:
    base = harness.load_config(args.config) if args.config else {}
    if args.theory:
        a_vals = args.a or base.get("a")
        if not a_vals:
            raise ValidationError("--theory needs an a grid")
        rows = harness.emit_theory_curves(a_vals, b_fixed=args.b_fixed, s_fixed=args.s_fixed)
        text = harness.theory_csv(rows)
        if args.output:
            Path(args.output).write_text(text)
        else:
            sys.stdout.write(text)
        return 0
    overrides = {
        "a": args.a,
        "b": args.b,
        "s": args.s,
        "n": args.n,
        "trials": args.trials,
        "preset": args.preset,
        "label_modes": args.label_modes,
        "matcher": args.matcher,
        "seed_fraction": args.seed_fraction,
        "base_seed": args.seed,
        "eps": args.eps,
        "output": args.output,
        "record_wall_time": True if args.record_wall_time else None,
        "community": False if args.no_community else None,
    }
    spec = harness.merged_spec(base, overrides)
    rows = harness.run_sweep(spec)
    if not spec.output:
        sys.stdout.write(harness.rows_to_csv(rows, spec.columns))
    else:
        print(f"wrote {len(rows)} rows to {spec.output}")
    return 0


def cmd_verify(args) -> int:
    checks = run_suites(args.suite)
    for c in checks:
        print(f"{'PASS' if c.ok else 'FAIL'}  {c.name}  ({c.detail})")
    failed = sum(not c.ok for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if failed == 0 else 1


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="csbm", description="Graph matching for correlated two-community SBMs.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a correlated SBM instance bundle")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--a", type=float, required=True)
    g.add_argument("--b", type=float, required=True)
    g.add_argument("--s", type=float, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("trees", help="rooted-tree catalogs")
    tsub = t.add_subparsers(dest="action", required=True)
    te = tsub.add_parser("enum", help="enumerate and filter rooted trees with K edges")
    te.add_argument("--edges", type=int, required=True)
    te.add_argument("--max-aut", type=_optional_int, default=None)
    te.add_argument("--max-deg", type=_optional_int, default=None)
    te.add_argument("--count-only", action="store_true")
    te.add_argument("--out")
    te.set_defaults(func=cmd_trees)

    f = sub.add_parser("family", help="chandelier families")
    fsub = f.add_subparsers(dest="action", required=True)
    fd = fsub.add_parser("describe", help="size, N and DP cost of a family")
    fd.add_argument("--preset", choices=["tiny", "small", "medium"])
    fd.add_argument("--K", type=int)
    fd.add_argument("--L", type=int)
    fd.add_argument("--M", type=int)
    fd.add_argument("--R", type=_optional_int, default=None)
    fd.add_argument("--D", type=_optional_int, default=None)
    fd.add_argument("--n", type=int, default=1000, help="host size for the cost estimate")
    fd.add_argument("--a", type=float)
    fd.add_argument("--b", type=float)
    fd.add_argument("--s", type=float)
    fd.add_argument("--seed", type=int, default=0)
    fd.set_defaults(func=cmd_family)

    c = sub.add_parser("communities", help="community recovery on one graph")
    c.add_argument("--graph", required=True)
    c.add_argument("--a", type=float, required=True)
    c.add_argument("--b", type=float, required=True)
    c.add_argument("--eps", type=float, default=0.1)
    c.add_argument("--m", type=int, default=None, help="number of hold-out parts")
    c.add_argument("--sigma", help="ground-truth labels for diagnostics")
    c.add_argument("--exact", action="store_true", help="finish with majority sweeps")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_communities)

    s = sub.add_parser("score", help="similarity score matrix")
    s.add_argument("--instance", required=True)
    s.add_argument("--preset", default="tiny", choices=["tiny", "small", "medium"])
    s.add_argument("--mode", default="colored", choices=["exact", "colored"])
    s.add_argument("--centering", default="true", choices=["true", "estimated"])
    s.add_argument("--t", type=int, default=None)
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_score)

    m = sub.add_parser("match", help="graph matching")
    msub = m.add_subparsers(dest="action", required=True)
    mr = msub.add_parser("run", help="end-to-end pipeline")
    mr.add_argument("--instance", required=True)
    mr.add_argument("--preset", default="tiny", choices=["tiny", "small", "medium"])
    mr.add_argument("--oracle-labels", action="store_true")
    mr.add_argument("--c", type=float, default=0.5)
    mr.add_argument("--t", type=int, default=None)
    mr.add_argument("--tau-quantile", type=float, default=None)
    mr.add_argument("--eps", type=float, default=0.1)
    mr.add_argument("--no-union", action="store_true")
    mr.add_argument("--seed", type=int, default=0)
    mr.add_argument("--out", default=None)
    mr.set_defaults(func=cmd_match_run)
    mb = msub.add_parser("boost", help="seeded common-neighbour boosting")
    mb.add_argument("--instance", required=True)
    mb.add_argument("--seed-matching", required=True)
    mb.add_argument("--seed", type=int, default=0)
    mb.add_argument("--out", default=".")
    mb.set_defaults(func=cmd_match_boost)

    w = sub.add_parser("sweep", help="parameter sweep to CSV")
    w.add_argument("--config")
    w.add_argument("--a", type=_float_list)
    w.add_argument("--b", type=_float_list)
    w.add_argument("--s", type=_float_list)
    w.add_argument("--n", type=_int_list)
    w.add_argument("--trials", type=int)
    w.add_argument("--preset", choices=["tiny", "small", "medium"])
    w.add_argument("--label-modes", type=_str_list)
    w.add_argument("--matcher", choices=list(harness.MATCHERS))
    w.add_argument("--seed-fraction", type=float)
    w.add_argument("--eps", type=float)
    w.add_argument("--seed", type=int)
    w.add_argument("--output")
    w.add_argument("--record-wall-time", action="store_true")
    w.add_argument("--no-community", action="store_true")
    w.add_argument("--theory", action="store_true", help="emit boundary curves instead of running trials")
    w.add_argument("--b-fixed", type=float)
    w.add_argument("--s-fixed", type=float)
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="oracle cross-checks")
    v.add_argument("--suite", default="all", choices=["trees", "counting", "moments", "all"])
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
