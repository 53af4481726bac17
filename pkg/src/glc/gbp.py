"""Parent-to-child GBP on the three-layer region graph induced by a partition.

The construction requires a partition of the variables and factors with at
most two variables.  Internal regions hold a block's variables and its fully
contained factors; bridge regions hold the variables and factors of the edges
crossing between two blocks; sub regions (counting number -1) are the border
slices where internal and bridge regions intersect.  The bridge variables are
the union of the crossing factor scopes: a literal closure intersection can
pick up third-block variables, which breaks the once-each counting identity
the construction is validated against.

Two message families result: internal-to-sub (a block marginalized onto its
border facing a neighbor) and bridge-to-sub (crossing factors applied to an
incoming internal message and marginalized onto the receiving border).  A
converged internal message set, installed as the loop-correction messages of a
uniform-cavity partitioned state, should leave the pair consistency residual
at the convergence level; `verify_theorem1` measures exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tables
from .cavity import cavity_uniform
from .engine import GLCOptions, GLCState, consistency_residual, init_state, region_belief
from .errors import ConstructionError
from .factor_graph import FactorGraph, factor_product_table
from .lbp import LBPResult
from .regions import RegionCollection, partition_single_variables
from .tables import DistTable

Scope = tuple[int, ...]


@dataclass
class CvmConstruction:
    graph: FactorGraph
    partition: RegionCollection
    internal_factors: list[tuple[int, ...]]              # per region
    bridge_factors: dict[frozenset, tuple[int, ...]]     # per unordered neighbor pair
    bridge_vars: dict[frozenset, Scope]
    sub_vars: dict[tuple[int, int], Scope]               # (p, q) -> border of p facing q

    def border(self, of: int, facing: int) -> Scope:
        return self.sub_vars[(of, facing)]


def build_cvm(graph: FactorGraph, partition: RegionCollection) -> CvmConstruction:
    """Build and validate the construction; counting numbers are implicit
    (internal and bridge regions 1, sub regions -1) and the once-each counting
    identity is checked for every variable and factor."""
    if not partition.is_partition:
        raise ConstructionError("Theorem 1 preconditions not met: regions must "
                                "partition the variables")
    if any(len(f.scope) > 2 for f in graph.factors):
        raise ConstructionError("Theorem 1 preconditions not met: a factor has "
                                "more than 2 variables")
    member_of = {}
    for p, region in enumerate(partition.regions):
        for v in region.members:
            member_of[v] = p
    internal: list[list[int]] = [[] for _ in partition.regions]
    bridge_factors: dict[frozenset, list[int]] = {}
    for fid, f in enumerate(graph.factors):
        blocks = {member_of[v] for v in f.scope}
        if len(blocks) == 1:
            internal[blocks.pop()].append(fid)
        else:
            bridge_factors.setdefault(frozenset(blocks), []).append(fid)
    bridge_vars = {pair: tuple(sorted({v for fid in fids for v in graph.factors[fid].scope}))
                   for pair, fids in bridge_factors.items()}
    sub_vars: dict[tuple[int, int], Scope] = {}
    for p in range(len(partition.regions)):
        for q in partition.nb[p]:
            # border of p facing q: p's variables on q's perimeter
            sub_vars[(p, q)] = partition.intersections[(q, p)]
    if set(bridge_factors) != {frozenset((p, q))
                               for p in range(len(partition.regions))
                               for q in partition.nb[p]}:
        raise ConstructionError("bridge factors do not match the neighbor structure")
    cons = CvmConstruction(graph, partition, [tuple(i) for i in internal],
                           {k: tuple(v) for k, v in bridge_factors.items()},
                           bridge_vars, sub_vars)
    _check_counting_identity(cons)
    return cons


def _check_counting_identity(cons: CvmConstruction) -> None:
    graph, partition = cons.graph, cons.partition
    var_count = np.zeros(graph.n_vars)
    for region in partition.regions:
        for v in region.members:
            var_count[v] += 1
    for pair, vs in cons.bridge_vars.items():
        for v in vs:
            var_count[v] += 1
    for (p, q), vs in cons.sub_vars.items():
        for v in vs:
            var_count[v] -= 1
    if not np.all(var_count == 1):
        raise ConstructionError("variable counting identity violated")
    factor_count = np.zeros(graph.n_factors)
    for fids in cons.internal_factors:
        for fid in fids:
            factor_count[fid] += 1
    for fids in cons.bridge_factors.values():
        for fid in fids:
            factor_count[fid] += 1
    if not np.all(factor_count == 1):
        raise ConstructionError("factor counting identity violated")


@dataclass
class GbpMessages:
    is_msgs: dict[tuple[int, int], DistTable]  # (q, p): internal q onto its border facing p
    bs_msgs: dict[tuple[int, int], DistTable]  # (q, p): bridge onto p's border facing q
    converged: bool = False
    iterations: int = 0


def _expand_marginal(parts: list[DistTable], full: Scope, onto: Scope,
                     cards) -> DistTable:
    prod = tables.product(parts, cards)
    shape = tuple(cards[v] for v in full)
    values = np.array(np.broadcast_to(tables.aligned_values(prod, full, cards), shape))
    return tables.normalize(tables.marginalize(DistTable(full, values), onto))


def gbp_fixed_point(cons: CvmConstruction, max_iters: int = 10000,
                    tolerance: float = 1e-9) -> GbpMessages:
    """Iterate the two message families to a fixed point (flagged, not raised,
    on non-convergence).  Sweeps alternate: all internal-to-sub updates in
    ordered-pair order, then all bridge-to-sub updates."""
    graph, partition = cons.graph, cons.partition
    cards = graph.cards
    pairs = sorted((q, p) for p in range(len(partition.regions))
                   for q in partition.nb[p])
    psi_int = [tables.rescaled(factor_product_table(graph, fids))
               for fids in cons.internal_factors]
    psi_br = {pair: tables.rescaled(factor_product_table(graph, fids))
              for pair, fids in cons.bridge_factors.items()}
    is_msgs = {(q, p): tables.uniform(cons.border(q, p), cards) for q, p in pairs}
    bs_msgs = {(q, p): tables.uniform(cons.border(p, q), cards) for q, p in pairs}
    members = [r.members for r in partition.regions]
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        change = 0.0
        for q, p in pairs:
            parts = [psi_int[q]] + [bs_msgs[(q2, q)] for q2 in partition.nb[q] if q2 != p]
            new = _expand_marginal(parts, members[q], cons.border(q, p), cards)
            change = max(change, tables.max_abs_diff(new, is_msgs[(q, p)]))
            is_msgs[(q, p)] = new
        for q, p in pairs:
            pair = frozenset((q, p))
            new = _expand_marginal([psi_br[pair], is_msgs[(q, p)]],
                                   cons.bridge_vars[pair], cons.border(p, q), cards)
            change = max(change, tables.max_abs_diff(new, bs_msgs[(q, p)]))
            bs_msgs[(q, p)] = new
        if change < tolerance:
            converged = True
            break
    return GbpMessages(is_msgs, bs_msgs, converged, iterations)


def gbp_region_beliefs(cons: CvmConstruction, msgs: GbpMessages) -> list[DistTable]:
    """Internal-region beliefs: block factors times all incoming bridge messages."""
    cards = cons.graph.cards
    out = []
    for p, region in enumerate(cons.partition.regions):
        parts = [tables.rescaled(factor_product_table(cons.graph, cons.internal_factors[p]))]
        parts += [msgs.bs_msgs[(q, p)] for q in cons.partition.nb[p]]
        out.append(_expand_marginal(parts, region.members, region.members, cards))
    return out


def _state_with_messages(graph: FactorGraph, partition: RegionCollection,
                         messages: dict[tuple[int, int], DistTable]) -> GLCState:
    cavities = [cavity_uniform(graph, r) for r in partition.regions]
    state = init_state(graph, partition, cavities, GLCOptions(mode="partition"))
    for key, table in messages.items():
        if state.messages[key].scope != table.scope:
            raise ConstructionError(f"message scope mismatch for pair {key}")
        state.messages[key] = tables.normalize(table)
    state.beliefs = [region_belief(state, p) for p in state.region_ids()]
    return state


def verify_theorem1(cons: CvmConstruction, msgs: GbpMessages) -> float:
    """Install the internal-to-sub messages as loop-correction messages over a
    uniform-cavity partitioned state and return the max pair-consistency
    residual (should sit at the GBP convergence level)."""
    installed = {(p, q): msgs.is_msgs[(q, p)]
                 for p in range(len(cons.partition.regions))
                 for q in cons.partition.nb[p]}
    state = _state_with_messages(cons.graph, cons.partition, installed)
    return consistency_residual(state)


def lbp_messages_to_glc(graph: FactorGraph, result: LBPResult) -> GLCState:
    """Map a sum-product fixed point onto a single-variable-partition state.

    Requires pairwise factors with distinct scopes.  The message into variable
    p from neighbor q is the product of everything q received except what came
    through the q-p edge factor.
    """
    if any(len(f.scope) > 2 for f in graph.factors):
        raise ConstructionError("mapping requires factors with at most 2 variables")
    edge_factor: dict[frozenset, int] = {}
    for fid, f in enumerate(graph.factors):
        if len(f.scope) == 2:
            key = frozenset(f.scope)
            if key in edge_factor:
                raise ConstructionError("mapping requires distinct pairwise scopes "
                                        f"(duplicate factor over {tuple(sorted(key))})")
            edge_factor[key] = fid
    partition = partition_single_variables(graph)
    messages = {}
    for p in range(graph.n_vars):
        for q in partition.nb[p]:
            fid = edge_factor.get(frozenset((p, q)))
            if fid is None:
                raise ConstructionError(f"neighbors {p},{q} share no pairwise factor")
            prod = np.ones(graph.cards[q])
            for other in graph.var_factors[q]:
                if other != fid:
                    prod = prod * result.messages[(other, q)]
            messages[(p, q)] = tables.normalize(DistTable((q,), prod))
    return _state_with_messages(graph, partition, messages)


def lbp_fixed_point_residual(graph: FactorGraph, result: LBPResult) -> float:
    return consistency_residual(lbp_messages_to_glc(graph, result))
