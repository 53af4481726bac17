"""Experiment orchestration: generate or load models, run a method, score it
against the exact oracle, and emit CSV rows plus a companion JSON with the
raw marginals so every error number can be recomputed offline.
"""

from __future__ import annotations

import csv
import json
import statistics
import time
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from . import tables, uai
from .cavity import CavityTable, cavity_estimate_clamp, cavity_uniform
from .engine import GLCOptions, run_glc
from .errors import GlcError, TooLargeError
from .exact import exact_singles
from .factor_graph import FactorGraph
from .gbp import build_cvm, gbp_fixed_point, gbp_region_beliefs
from .generators import (gen_cycle_ising, gen_ising_grid, gen_random_table_grid,
                         gen_regular_ising, instance_seed)
from .lbp import LBPOptions, run_lbp
from .regions import (RegionCollection, clusters_factor_domains, clusters_loops,
                      partition_single_variables)
from .tables import DistTable

CSV_FIELDS = ["method", "instance", "seed", "n_vars", "beta", "converged",
              "iterations", "avg_error", "max_error", "time_s"]


@dataclass
class ModelSpec:
    kind: str                  # ising-grid | table-grid | regular | cycle | uai
    size: int = 6
    periodic: bool = True
    beta: float = 1.0
    degree: int = 3
    field_std: float | None = None
    uai_path: str | None = None


@dataclass
class MethodSpec:
    name: str                  # lbp | glc | gbp
    regions: str = "single"    # single | factor | loop3 | loop4
    cavity: str = "uniform"    # uniform | full | exact

    def label(self) -> str:
        if self.name == "lbp":
            return "lbp"
        if self.name == "gbp":
            return f"gbp-{self.regions}"
        return f"glc-{self.regions}-{self.cavity}"


@dataclass
class ExperimentSpec:
    model: ModelSpec
    methods: list[MethodSpec]
    seed: int = 0
    replications: int = 10
    max_iters: int = 10000
    tolerance: float = 1e-9


@dataclass
class RunReport:
    method: str
    instance: int
    seed: str
    n_vars: int
    beta: float
    converged: bool
    iterations: int
    avg_error: float
    max_error: float
    time_s: float


def avg_marginal_error(estimate: Sequence[DistTable], exact: Sequence[DistTable]) -> float:
    """Mean over variables of the L1 distance between marginal tables."""
    if len(estimate) != len(exact):
        raise ValueError("marginal lists differ in length")
    total = 0.0
    for est, ex in zip(estimate, exact):
        if est.scope != ex.scope or est.values.shape != ex.values.shape:
            raise ValueError(f"domain mismatch at scope {est.scope} vs {ex.scope}")
        total += float(np.abs(est.values - ex.values).sum())
    return total / len(exact)


def max_marginal_error(estimate: Sequence[DistTable], exact: Sequence[DistTable]) -> float:
    worst = 0.0
    for est, ex in zip(estimate, exact):
        worst = max(worst, float(np.abs(est.values - ex.values).max()))
    return worst


def build_model(spec: ModelSpec, seed) -> FactorGraph:
    if spec.kind == "ising-grid":
        return gen_ising_grid(spec.size, spec.periodic, spec.beta, seed)
    if spec.kind == "table-grid":
        return gen_random_table_grid(spec.size, spec.periodic, seed)
    if spec.kind == "regular":
        return gen_regular_ising(spec.size, spec.degree, spec.beta, seed,
                                 field_std=spec.field_std)
    if spec.kind == "cycle":
        return gen_cycle_ising(spec.size, spec.beta, seed)
    if spec.kind == "uai":
        return uai.read(spec.uai_path)
    raise ValueError(f"unknown model kind {spec.kind!r}")


def build_regions(graph: FactorGraph, kind: str) -> RegionCollection:
    if kind == "single":
        return partition_single_variables(graph)
    if kind == "factor":
        return clusters_factor_domains(graph)
    if kind.startswith("loop"):
        return clusters_loops(graph, int(kind[4:]))
    raise ValueError(f"unknown region kind {kind!r}")


def build_cavities(graph: FactorGraph, collection: RegionCollection, kind: str,
                   lbp_opts: LBPOptions | None = None) -> list[CavityTable]:
    if kind == "uniform":
        return [cavity_uniform(graph, r) for r in collection.regions]
    method = {"full": "lbp", "exact": "exact"}.get(kind)
    if method is None:
        raise ValueError(f"unknown cavity kind {kind!r}")
    return [cavity_estimate_clamp(graph, r, method=method, opts=lbp_opts)
            for r in collection.regions]


def run_method(graph: FactorGraph, method: MethodSpec, max_iters: int,
               tolerance: float):
    """Run one method; returns (singles, converged, iterations, wall_seconds).

    Timing covers the whole call, including cavity estimation for full-cavity
    runs, since that cost is part of the method.
    """
    start = time.perf_counter()
    if method.name == "lbp":
        res = run_lbp(graph, LBPOptions(max_iters=max_iters, tolerance=tolerance))
        out = res.singles, res.converged, res.iterations
    elif method.name == "glc":
        collection = build_regions(graph, method.regions)
        cavities = build_cavities(graph, collection, method.cavity,
                                  LBPOptions(max_iters=max_iters, tolerance=tolerance))
        res = run_glc(graph, collection, cavities,
                      GLCOptions(max_iters=max_iters, tolerance=tolerance))
        out = res.marginals, res.converged, res.iterations
    elif method.name == "gbp":
        collection = build_regions(graph, method.regions)
        cons = build_cvm(graph, collection)
        msgs = gbp_fixed_point(cons, max_iters=max_iters, tolerance=tolerance)
        beliefs = gbp_region_beliefs(cons, msgs)
        singles: list[DistTable] = [None] * graph.n_vars  # type: ignore[list-item]
        for p, region in enumerate(collection.regions):
            for v in region.members:
                singles[v] = tables.normalize(tables.marginalize(beliefs[p], (v,)))
        out = singles, msgs.converged, msgs.iterations
    else:
        raise ValueError(f"unknown method {method.name!r}")
    return (*out, time.perf_counter() - start)


def run_experiment(spec: ExperimentSpec, out_prefix: str | None = None
                   ) -> tuple[list[RunReport], dict]:
    """Run every (method, instance) cell, score against variable elimination,
    and optionally write `<prefix>.csv` and `<prefix>.json`."""
    reports: list[RunReport] = []
    marginal_dump: dict = {"instances": {}}
    for k in range(spec.replications):
        seed = instance_seed(spec.seed, k)
        graph = build_model(spec.model, seed)
        try:
            oracle = exact_singles(graph)
        except TooLargeError as e:
            raise GlcError(f"exact oracle infeasible for instance {k}; "
                           f"use a smaller instance ({e})")
        inst: dict = {"seed": list(seed),
                      "exact": [[float(x) for x in t.values] for t in oracle.singles],
                      "methods": {}}
        for method in spec.methods:
            singles, converged, iters, wall = run_method(
                graph, method, spec.max_iters, spec.tolerance)
            reports.append(RunReport(
                method=method.label(), instance=k, seed=str(seed),
                n_vars=graph.n_vars, beta=spec.model.beta,
                converged=converged, iterations=iters,
                avg_error=avg_marginal_error(singles, oracle.singles),
                max_error=max_marginal_error(singles, oracle.singles),
                time_s=wall))
            inst["methods"][method.label()] = [[float(x) for x in t.values]
                                               for t in singles]
        marginal_dump["instances"][str(k)] = inst
    reports.sort(key=lambda r: (r.method, r.instance))
    if out_prefix:
        write_csv(out_prefix + ".csv", reports)
        with open(out_prefix + ".json", "w") as fh:
            json.dump(marginal_dump, fh)
    return reports, marginal_dump


def aggregate_rows(reports: list[RunReport]) -> list[dict]:
    """One mean and one median row per method, over its converged instances."""
    rows = []
    methods = sorted({r.method for r in reports})
    for m in methods:
        got = [r for r in reports if r.method == m and r.converged]
        for stat, fn in (("mean", statistics.mean), ("median", statistics.median)):
            row = {"method": m, "instance": stat, "seed": "", "n_vars": "",
                   "beta": "", "converged": len(got), "iterations": "",
                   "avg_error": "", "max_error": "", "time_s": ""}
            if got:
                row.update(n_vars=got[0].n_vars, beta=got[0].beta,
                           iterations=fn(r.iterations for r in got),
                           avg_error=fn(r.avg_error for r in got),
                           max_error=fn(r.max_error for r in got),
                           time_s=fn(r.time_s for r in got))
            rows.append(row)
    return rows


def write_csv(path: str, reports: list[RunReport]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for r in reports:
            writer.writerow(asdict(r))
        for row in aggregate_rows(reports):
            writer.writerow(row)
