"""Runnable invariant suites exposed through the CLI `check` subcommand.

Each suite builds seeded instances, runs the relevant pipeline, and reports
one line per instance; these are the same properties the acceptance tests
pin, packaged for interactive use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .bench import avg_marginal_error
from .cavity import cavity_estimate_clamp
from .engine import GLCOptions, run_glc
from .exact import exact_singles
from .gbp import build_cvm, gbp_fixed_point, lbp_fixed_point_residual, verify_theorem1
from .generators import (factor_graph_girth, gen_cycle_ising, gen_ising_grid,
                         gen_regular_ising, grid_block_partition, instance_seed)
from .lbp import LBPOptions, run_lbp
from .regions import build_collection, partition_single_variables


@dataclass
class CheckReport:
    name: str
    passed: bool
    lines: list[str] = field(default_factory=list)


def check_theorem1(seed: int = 0, count: int = 5, gbp_tolerance: float = 1e-10,
                   residual_bound: float = 1e-7) -> CheckReport:
    """GBP fixed points on block-partitioned grids map to consistent
    loop-correction states."""
    lines = []
    passed = True
    for k in range(count):
        graph = gen_ising_grid(4, periodic=False, beta=1.0, seed=instance_seed(seed, k))
        partition = build_collection(graph, grid_block_partition(4, 2))
        cons = build_cvm(graph, partition)
        msgs = gbp_fixed_point(cons, tolerance=gbp_tolerance)
        residual = verify_theorem1(cons, msgs)
        ok = msgs.converged and residual <= residual_bound
        passed &= ok
        lines.append(f"instance {k}: gbp converged={msgs.converged} "
                     f"iters={msgs.iterations} residual={residual:.3e} "
                     f"{'ok' if ok else 'FAIL'}")
    return CheckReport("theorem1", passed, lines)


def check_corollary1(seed: int = 0, count: int = 5, n: int = 14,
                     residual_bound: float = 1e-6) -> CheckReport:
    """Converged sum-product fixed points on short-cycle-free pairwise graphs
    map to consistent single-variable loop-correction states."""
    lines = []
    passed = True
    collected = 0
    k = 0
    while collected < count and k < count * 20:
        graph = gen_regular_ising(n, 3, beta=1.0, seed=instance_seed(seed, k))
        k += 1
        girth = factor_graph_girth(graph)
        if girth <= 4:
            lines.append(f"seed {k - 1}: skipped (factor-graph girth {girth})")
            continue
        res = run_lbp(graph, LBPOptions())
        if not res.converged:
            lines.append(f"seed {k - 1}: skipped (sum-product did not converge)")
            continue
        residual = lbp_fixed_point_residual(graph, res)
        ok = residual <= residual_bound
        passed &= ok
        collected += 1
        lines.append(f"seed {k - 1}: girth={girth} lbp iters={res.iterations} "
                     f"residual={residual:.3e} {'ok' if ok else 'FAIL'}")
    if collected < count:
        passed = False
        lines.append(f"only {collected}/{count} usable instances")
    return CheckReport("corollary1", passed, lines)


def check_exactness(seed: int = 0, count: int = 10, n: int = 8,
                    exact_bound: float = 1e-8, lbp_bound: float = 1e-6) -> CheckReport:
    """Single-cycle models where clamping any perimeter leaves a chain: exact
    cavities give exact marginals, Bethe cavities match to the Bethe level."""
    lines = []
    passed = True
    for k in range(count):
        graph = gen_cycle_ising(n, beta=1.0, seed=instance_seed(seed, k))
        oracle = exact_singles(graph)
        collection = partition_single_variables(graph)
        errs = {}
        for kind, method in (("exact", "exact"), ("lbp", "lbp")):
            cavities = [cavity_estimate_clamp(graph, r, method=method)
                        for r in collection.regions]
            res = run_glc(graph, collection, cavities, GLCOptions())
            errs[kind] = avg_marginal_error(res.marginals, oracle.singles)
        ok = errs["exact"] <= exact_bound and errs["lbp"] <= lbp_bound
        passed &= ok
        lines.append(f"instance {k}: err(exact-cavity)={errs['exact']:.3e} "
                     f"err(bethe-cavity)={errs['lbp']:.3e} {'ok' if ok else 'FAIL'}")
    return CheckReport("exactness", passed, lines)


ALL_CHECKS = {
    "theorem1": check_theorem1,
    "corollary1": check_corollary1,
    "exactness": check_exactness,
}
