"""Command line entry points: model generation, benchmark runs, cavity
precomputation, and invariant check suites."""

from __future__ import annotations

import argparse
import json
import sys

from . import uai
from .bench import (ExperimentSpec, MethodSpec, ModelSpec, build_cavities,
                    build_model, build_regions, run_experiment)
from .cavity import cavity_to_json
from .checks import ALL_CHECKS
from .lbp import LBPOptions


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", default="ising-grid",
                   choices=["ising-grid", "table-grid", "regular", "cycle", "uai"])
    p.add_argument("--size", type=int, default=6, help="grid side / node count")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--periodic", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--field-std", type=float, default=None,
                   help="override the field scale of regular models")
    p.add_argument("--uai", default=None, help="path to a UAI model file")


def _model_spec(args) -> ModelSpec:
    return ModelSpec(kind=args.model, size=args.size, periodic=args.periodic,
                     beta=args.beta, degree=args.degree, field_std=args.field_std,
                     uai_path=args.uai)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="glc")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a model and write it as UAI")
    _add_model_flags(p_gen)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)

    p_run = sub.add_parser("run", help="run methods against the exact oracle")
    _add_model_flags(p_run)
    p_run.add_argument("--spec", default=None,
                       help="JSON experiment spec (overrides the other flags)")
    p_run.add_argument("--method", default="lbp", choices=["lbp", "glc", "gbp"])
    p_run.add_argument("--regions", default="single",
                       choices=["single", "factor", "loop3", "loop4"])
    p_run.add_argument("--cavity", default="uniform",
                       choices=["uniform", "full", "exact"])
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--replications", type=int, default=10)
    p_run.add_argument("--max-iters", type=int, default=10000)
    p_run.add_argument("--tol", type=float, default=1e-9)
    p_run.add_argument("--out", required=True, help="output prefix for .csv/.json")

    p_cav = sub.add_parser("cavity", help="precompute cavity tables to JSON")
    _add_model_flags(p_cav)
    p_cav.add_argument("--regions", default="single",
                       choices=["single", "factor", "loop3", "loop4"])
    p_cav.add_argument("--cavity", default="full", choices=["uniform", "full", "exact"])
    p_cav.add_argument("--seed", type=int, default=0)
    p_cav.add_argument("--max-iters", type=int, default=10000)
    p_cav.add_argument("--tol", type=float, default=1e-9)
    p_cav.add_argument("--out", required=True)

    p_chk = sub.add_parser("check", help="run an invariant suite")
    p_chk.add_argument("suite", choices=sorted(ALL_CHECKS) + ["all"])
    p_chk.add_argument("--seed", type=int, default=0)
    p_chk.add_argument("--count", type=int, default=5)

    args = parser.parse_args(argv)

    if args.command == "gen":
        graph = build_model(_model_spec(args), args.seed)
        uai.write(args.out, graph)
        print(f"wrote {graph.n_vars} variables, {graph.n_factors} factors to {args.out}")
        return 0

    if args.command == "run":
        if args.spec:
            with open(args.spec) as fh:
                raw = json.load(fh)
            spec = ExperimentSpec(
                model=ModelSpec(**raw["model"]),
                methods=[MethodSpec(**m) for m in raw["methods"]],
                seed=raw.get("seed", 0),
                replications=raw.get("replications", 10),
                max_iters=raw.get("max_iters", 10000),
                tolerance=raw.get("tolerance", 1e-9))
        else:
            spec = ExperimentSpec(
                model=_model_spec(args),
                methods=[MethodSpec(args.method, args.regions, args.cavity)],
                seed=args.seed, replications=args.replications,
                max_iters=args.max_iters, tolerance=args.tol)
        reports, _ = run_experiment(spec, out_prefix=args.out)
        for r in reports:
            print(f"{r.method} #{r.instance}: avg_error={r.avg_error:.3e} "
                  f"converged={r.converged} time={r.time_s:.2f}s")
        print(f"wrote {args.out}.csv and {args.out}.json")
        return 0

    if args.command == "cavity":
        graph = build_model(_model_spec(args), args.seed)
        collection = build_regions(graph, args.regions)
        opts = LBPOptions(max_iters=args.max_iters, tolerance=args.tol)
        cavities = build_cavities(graph, collection, args.cavity, opts)
        blob = [json.loads(cavity_to_json(ct, collection.regions[ct.region_id]))
                for ct in cavities]
        with open(args.out, "w") as fh:
            json.dump(blob, fh)
        print(f"wrote {len(blob)} cavity tables to {args.out}")
        return 0

    if args.command == "check":
        names = sorted(ALL_CHECKS) if args.suite == "all" else [args.suite]
        ok = True
        for name in names:
            report = ALL_CHECKS[name](seed=args.seed, count=args.count)
            ok &= report.passed
            print(f"[{report.name}] {'PASS' if report.passed else 'FAIL'}")
            for line in report.lines:
                print(f"  {line}")
        return 0 if ok else 1

    return 2


if __name__ == "__main__":
    sys.exit(main())
