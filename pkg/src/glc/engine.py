"""Generalized loop correction over cavity regions.

Two update modes share one state object.  When the regions partition the
variables, each ordered neighbor pair (q, p) carries a message over the slice
of p's perimeter owned by q, updated as a ratio of bridge-divided marginals of
the two region beliefs.  For overlapping regions, each region owns a perimeter
region graph: the maximal perimeter slices become top nodes, intersections are
closed recursively into sub-nodes carrying Möbius counting numbers, and each
iteration runs a downward pass (children become geometric means of parent
marginals), an upward pass (effective top tables folding in sub-node
corrections), and the ratio update on every top node.  On partitions the
general path reduces to the message path node-for-node.

Ratios of marginals never divide by raw factor tables: the "belief without
the bridge factors" is rebuilt from its factorization whenever the bridge
product contains zeros, so models with deterministic entries stay supported.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import tables
from .cavity import CavityTable
from .errors import ConstructionError, DegenerateTableError
from .factor_graph import FactorGraph, factor_product_table
from .regions import RegionCollection
from .tables import DistTable

Scope = tuple[int, ...]


@dataclass
class GLCOptions:
    max_iters: int = 10000
    tolerance: float = 1e-9
    damping: float = 0.0
    schedule: str = "round-robin"  # or "random-permutation"
    mode: str = "auto"             # auto | partition | general
    seed: int = 0

    def __post_init__(self):
        if self.schedule not in ("round-robin", "random-permutation"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.mode not in ("auto", "partition", "general"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class PrgNode:
    vars: Scope
    cn: int
    parents: tuple[int, ...]
    children: tuple[int, ...]
    is_top: bool
    sources: tuple[int, ...]  # neighbor ids whose perimeter slice equals `vars`


@dataclass
class PerimeterRegionGraph:
    owner: int
    nodes: list[PrgNode]       # sorted by decreasing size, then variable tuple
    tops: tuple[int, ...]      # indices into nodes, in canonical set order


def build_perimeter_region_graph(collection: RegionCollection, p: int) -> PerimeterRegionGraph:
    """Close the maximal perimeter slices of region p under intersection."""
    slices: dict[Scope, list[int]] = {}
    for q in collection.nb[p]:
        slices.setdefault(collection.intersections[(p, q)], []).append(q)
    top_sets = [s for s in slices
                if not any(set(s) < set(t) for t in slices if t != s)]
    node_sets: set[Scope] = set(top_sets)
    frontier = list(node_sets)
    while frontier:
        new = []
        for a in frontier:
            for b in node_sets:
                inter = tuple(sorted(set(a) & set(b)))
                if inter and inter not in node_sets:
                    new.append(inter)
        node_sets |= set(new)
        frontier = new
    ordered = sorted(node_sets, key=lambda s: (-len(s), s))
    index = {s: i for i, s in enumerate(ordered)}
    parents: list[tuple[int, ...]] = []
    for s in ordered:
        supers = [t for t in ordered if set(s) < set(t)]
        immediate = [t for t in supers
                     if not any(set(s) < set(u) < set(t) for u in supers)]
        parents.append(tuple(sorted(index[t] for t in immediate)))
    children: list[list[int]] = [[] for _ in ordered]
    for i, ps in enumerate(parents):
        for j in ps:
            children[j].append(i)
    cn: list[int] = [0] * len(ordered)
    for i, s in enumerate(ordered):  # decreasing size: ancestors are resolved first
        ancestors = [index[t] for t in ordered if set(s) < set(t)]
        cn[i] = 1 - sum(cn[j] for j in ancestors)
    top_set = set(top_sets)
    nodes = [PrgNode(s, cn[i], parents[i], tuple(children[i]), s in top_set,
                     tuple(sorted(slices.get(s, ()))) if s in top_set else ())
             for i, s in enumerate(ordered)]
    tops = tuple(sorted((i for i, nd in enumerate(nodes) if nd.is_top),
                        key=lambda i: nodes[i].vars))
    return PerimeterRegionGraph(p, nodes, tops)


@dataclass
class GLCState:
    graph: FactorGraph
    collection: RegionCollection
    cavities: list[CavityTable]
    options: GLCOptions
    mode: str
    scopes: list[Scope]                    # per region: members ∪ factor closure
    region_psi: list[DistTable]
    prgs: list[PerimeterRegionGraph]
    node_beliefs: list[list[DistTable]]    # general mode, per region per node
    messages: dict[tuple[int, int], DistTable]  # partition mode, (p, q) -> m_{q->p}
    update_pairs: list[list[tuple[Scope, int, int]]]  # (slice vars, q, node idx or -1)
    beliefs: list[DistTable] = field(default_factory=list)
    b_eff: list[dict[int, DistTable]] = field(default_factory=list)
    mu: list[dict[tuple[int, int], DistTable]] = field(default_factory=list)
    bridge_cache: dict[frozenset, DistTable | None] = field(default_factory=dict)
    offbridge_cache: dict[tuple[int, int], DistTable] = field(default_factory=dict)
    iteration: int = 0
    trace: list[float] = field(default_factory=list)

    def region_ids(self) -> range:
        return range(len(self.collection.regions))


def init_state(graph: FactorGraph, collection: RegionCollection,
               cavities: Sequence[CavityTable], opts: GLCOptions | None = None) -> GLCState:
    opts = opts or GLCOptions()
    regions = collection.regions
    if len(cavities) != len(regions):
        raise ConstructionError("cavities must cover every region")
    for region, ct in zip(regions, cavities):
        if ct.table.scope != region.perimeter:
            raise ConstructionError(
                f"cavity table for region {region.id} has scope {ct.table.scope}, "
                f"expected perimeter {region.perimeter}")
    mode = opts.mode
    if mode == "auto":
        mode = "partition" if collection.is_partition else "general"
    if mode == "partition" and not collection.is_partition:
        raise ConstructionError("partition mode requires a partition collection")
    scopes = [tuple(sorted(set(r.members) | set(r.plus_r))) for r in regions]
    region_psi = [tables.rescaled(factor_product_table(graph, r.n_r)) for r in regions]
    prgs: list[PerimeterRegionGraph] = []
    node_beliefs: list[list[DistTable]] = []
    messages: dict[tuple[int, int], DistTable] = {}
    update_pairs: list[list[tuple[Scope, int, int]]] = []
    for p, region in enumerate(regions):
        if mode == "general":
            prg = build_perimeter_region_graph(collection, p)
            prgs.append(prg)
            node_beliefs.append([tables.uniform(nd.vars, graph.cards) for nd in prg.nodes])
            pairs = [(prg.nodes[i].vars, q, i)
                     for i in prg.tops for q in prg.nodes[i].sources]
        else:
            pairs = []
            for q in collection.nb[p]:
                inter = collection.intersections[(p, q)]
                messages[(p, q)] = tables.uniform(inter, graph.cards)
                pairs.append((inter, q, -1))
        update_pairs.append(sorted(pairs, key=lambda t: (t[0], t[1])))
    state = GLCState(graph, collection, list(cavities), opts, mode, scopes,
                     region_psi, prgs, node_beliefs, messages, update_pairs)
    state.b_eff = [dict() for _ in regions]
    state.mu = [dict() for _ in regions]
    state.beliefs = [region_belief(state, p) for p in state.region_ids()]
    return state


def _product_with_exponents(state: GLCState, parts: list[tuple[DistTable, float]],
                            scope: Scope, context: str) -> DistTable:
    """Normalized product of tables raised to exponents, expanded onto `scope`.

    Negative exponents go into a separate denominator so zero entries resolve
    as 0/0 -> 0 instead of infinities.
    """
    cards = state.graph.cards
    numer = [tables.power(t, e) for t, e in parts if e > 0]
    denom = [tables.power(t, -e) for t, e in parts if e < 0]
    num = tables.product(numer, cards)
    shape = tuple(cards[v] for v in scope)
    num_vals = np.broadcast_to(tables.aligned_values(num, scope, cards), shape)
    if denom:
        den = tables.product(denom, cards)
        den_vals = np.broadcast_to(tables.aligned_values(den, scope, cards), shape)
        values = tables.ratio(num_vals, den_vals, context)
    else:
        values = np.array(num_vals)
    try:
        return tables.normalize(DistTable(scope, values))
    except DegenerateTableError:
        raise DegenerateTableError(f"degenerate belief: {context}")


def _belief_parts(state: GLCState, p: int) -> list[tuple[DistTable, float]]:
    parts: list[tuple[DistTable, float]] = [(state.cavities[p].table, 1.0),
                                            (state.region_psi[p], 1.0)]
    if state.mode == "partition":
        for vars_, q, _ in state.update_pairs[p]:
            parts.append((state.messages[(p, q)], 1.0))
    else:
        for nd, b in zip(state.prgs[p].nodes, state.node_beliefs[p]):
            if nd.cn != 0:
                parts.append((b, float(nd.cn)))
    return parts


def region_belief(state: GLCState, p: int) -> DistTable:
    """Current belief over region p's variable closure (cavity × factors ×
    message/node corrections), normalized."""
    return _product_with_exponents(state, _belief_parts(state, p), state.scopes[p],
                                   f"region {p} belief")


def _bridge_table(state: GLCState, p: int, q: int) -> DistTable | None:
    key = frozenset((p, q))
    if key not in state.bridge_cache:
        shared = sorted(set(state.collection.regions[p].n_r)
                        & set(state.collection.regions[q].n_r))
        state.bridge_cache[key] = (factor_product_table(state.graph, shared)
                                   if shared else None)
    return state.bridge_cache[key]


def _consistency_marginal(state: GLCState, r: int, other: int, onto: Scope) -> DistTable:
    """Marginal onto `onto` of region r's belief with the r/other bridge factors
    divided out; this is the quantity both sides of a neighbor pair must agree on."""
    cards = state.graph.cards
    bridge = _bridge_table(state, r, other)
    if bridge is None:
        out = tables.marginalize(state.beliefs[r], onto)
    elif np.all(bridge.values > 0):
        scope = state.scopes[r]
        bvals = np.broadcast_to(tables.aligned_values(bridge, scope, cards),
                                state.beliefs[r].values.shape)
        divided = DistTable(scope, state.beliefs[r].values / bvals)
        out = tables.marginalize(divided, onto)
    else:
        # deterministic bridge entries: rebuild from the factorization instead
        key = (r, other)
        if key not in state.offbridge_cache:
            only = sorted(set(state.collection.regions[r].n_r)
                          - set(state.collection.regions[other].n_r))
            state.offbridge_cache[key] = tables.rescaled(
                factor_product_table(state.graph, only))
        parts = [(state.cavities[r].table, 1.0), (state.offbridge_cache[key], 1.0)]
        if state.mode == "partition":
            for vars_, q2, _ in state.update_pairs[r]:
                parts.append((state.messages[(r, q2)], 1.0))
        else:
            for nd, b in zip(state.prgs[r].nodes, state.node_beliefs[r]):
                if nd.cn != 0:
                    parts.append((b, float(nd.cn)))
        full = _product_with_exponents(state, parts, state.scopes[r],
                                       f"bridge-free belief of region {r}")
        out = tables.marginalize(full, onto)
    return tables.normalize(out)


def _apply_damping(new: DistTable, old: DistTable, damping: float) -> DistTable:
    if damping <= 0.0:
        return new
    return tables.normalize(DistTable(new.scope,
                                      (1.0 - damping) * new.values + damping * old.values))


def message_update(state: GLCState, q: int, p: int) -> DistTable:
    """New m_{q->p}: old message scaled by the ratio of the two bridge-divided
    belief marginals on the shared perimeter slice (partition mode)."""
    inter = state.collection.intersections[(p, q)]
    num = _consistency_marginal(state, q, p, inter)
    den = _consistency_marginal(state, p, q, inter)
    old = state.messages[(p, q)]
    values = tables.ratio(num.values, den.values, f"message {q}->{p}") * old.values
    new = tables.normalize(DistTable(inter, values))
    return _apply_damping(new, old, state.options.damping)


def downward_pass(state: GLCState, p: int) -> None:
    """Top-down: each sub-node becomes the geometric mean of its parents'
    marginals onto it; the parent marginals are cached for the upward pass."""
    prg = state.prgs[p]
    beliefs = state.node_beliefs[p]
    state.mu[p].clear()
    for i, nd in enumerate(prg.nodes):  # order has parents before children
        if nd.is_top:
            continue
        mus = []
        for j in nd.parents:
            marg = tables.marginalize(beliefs[j], nd.vars)
            if not float(marg.values.sum()) > 0.0:
                raise DegenerateTableError(
                    f"degenerate parent marginal onto {nd.vars} in region {p}")
            marg = tables.normalize(marg)
            state.mu[p][(j, i)] = marg
            mus.append(marg)
        k = float(len(mus))
        values = np.ones_like(mus[0].values)
        for m in mus:
            values = values * np.power(m.values, 1.0 / k)
        beliefs[i] = tables.normalize(DistTable(nd.vars, values))


def upward_pass(state: GLCState, p: int) -> None:
    """Bottom-up effective tables: leaves pass through, parents fold in each
    child's correction ratio against the cached downward marginal."""
    prg = state.prgs[p]
    beliefs = state.node_beliefs[p]
    cards = state.graph.cards
    eff = state.b_eff[p]
    eff.clear()
    for i in reversed(range(len(prg.nodes))):
        nd = prg.nodes[i]
        values = beliefs[i].values.copy()
        for c in nd.children:
            corr = tables.ratio(eff[c].values, state.mu[p][(i, c)].values,
                                f"upward correction in region {p}")
            cvals = tables.aligned_values(DistTable(prg.nodes[c].vars, corr),
                                          nd.vars, cards)
            values = values * cvals
        eff[i] = tables.normalize(DistTable(nd.vars, values))


def top_update(state: GLCState, p: int, q: int, node_idx: int) -> DistTable:
    """Replace a top-node table with the pair ratio times the effective table
    (raised to the node's counting number, which is 1 for tops)."""
    prg = state.prgs[p]
    nd = prg.nodes[node_idx]
    num = _consistency_marginal(state, q, p, nd.vars)
    den = _consistency_marginal(state, p, q, nd.vars)
    eff = tables.power(state.b_eff[p][node_idx], float(nd.cn))
    values = tables.ratio(num.values, den.values, f"top update {q}->{p}") * eff.values
    new = tables.normalize(DistTable(nd.vars, values))
    return _apply_damping(new, state.node_beliefs[p][node_idx], state.options.damping)


def sweep(state: GLCState) -> float:
    """One full pass over all regions; returns the max belief change."""
    snapshot = [b.values.copy() for b in state.beliefs]
    n = len(state.collection.regions)
    if state.options.schedule == "random-permutation":
        rng = np.random.default_rng(np.random.PCG64((state.options.seed, state.iteration)))
        order = [int(i) for i in rng.permutation(n)]
    else:
        order = list(range(n))
    for p in order:
        if state.mode == "general":
            downward_pass(state, p)
            state.beliefs[p] = region_belief(state, p)
            upward_pass(state, p)
            for vars_, q, node_idx in state.update_pairs[p]:
                state.node_beliefs[p][node_idx] = top_update(state, p, q, node_idx)
                state.beliefs[p] = region_belief(state, p)
        else:
            for vars_, q, _ in state.update_pairs[p]:
                state.messages[(p, q)] = message_update(state, q, p)
                state.beliefs[p] = region_belief(state, p)
    change = 0.0
    for p in state.region_ids():
        delta = float(np.abs(state.beliefs[p].values - snapshot[p]).max())
        change = max(change, delta)
    state.iteration += 1
    state.trace.append(change)
    return change


def single_marginals(state: GLCState) -> tuple[list[DistTable], float]:
    """Per-variable marginals from the lowest-id owning region, plus the max
    disagreement across all owning regions as a diagnostic."""
    owners: dict[int, list[int]] = {}
    for p, region in enumerate(state.collection.regions):
        for v in region.members:
            owners.setdefault(v, []).append(p)
    out: list[DistTable] = []
    discrepancy = 0.0
    for v in range(state.graph.n_vars):
        if v not in owners:
            raise ConstructionError(f"coverage violated: variable {v} in no region")
        cands = [tables.normalize(tables.marginalize(state.beliefs[p], (v,)))
                 for p in sorted(owners[v])]
        out.append(cands[0])
        for c in cands[1:]:
            discrepancy = max(discrepancy, tables.max_abs_diff(cands[0], c))
    return out, discrepancy


def consistency_residual(state: GLCState) -> float:
    """Max over update pairs of the disagreement between the two normalized
    bridge-divided marginals; ~0 at a fixed point."""
    worst = 0.0
    for p in state.region_ids():
        for vars_, q, _ in state.update_pairs[p]:
            num = _consistency_marginal(state, q, p, vars_)
            den = _consistency_marginal(state, p, q, vars_)
            worst = max(worst, tables.max_abs_diff(num, den))
    return worst


@dataclass
class GLCRunResult:
    marginals: list[DistTable]
    converged: bool
    iterations: int
    wall_time_s: float
    max_change_trace: list[float]
    ownership_discrepancy: float
    state: GLCState

    def to_json(self) -> str:
        return json.dumps({
            "marginals": {str(v): [float(x) for x in t.values]
                          for v, t in enumerate(self.marginals)},
            "converged": self.converged,
            "iterations": self.iterations,
            "wall_time_s": self.wall_time_s,
            "max_change_trace": self.max_change_trace,
            "ownership_discrepancy": self.ownership_discrepancy,
        })


def run_glc(graph: FactorGraph, collection: RegionCollection,
            cavities: Sequence[CavityTable], opts: GLCOptions | None = None) -> GLCRunResult:
    """Iterate region sweeps until the max belief change drops below tolerance."""
    opts = opts or GLCOptions()
    start = time.perf_counter()
    state = init_state(graph, collection, cavities, opts)
    converged = False
    while state.iteration < opts.max_iters:
        change = sweep(state)
        if change < opts.tolerance:
            converged = True
            break
    wall = time.perf_counter() - start
    marginals, disc = single_marginals(state)
    return GLCRunResult(marginals, converged, state.iteration, wall,
                        list(state.trace), disc, state)
