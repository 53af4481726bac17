"""Cavity-region collections: single-variable partitions, factor-domain
clusters, and loop clusters, with the neighbor/intersection bookkeeping the
correction engine consumes.

Loops are counted in the variable co-occurrence graph (two variables adjacent
iff they share a factor); a loop of length k is a simple k-cycle there.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .cavity import CavityRegion, make_region
from .errors import ConstructionError
from .factor_graph import FactorGraph


@dataclass
class RegionCollection:
    regions: list[CavityRegion]
    is_partition: bool
    nb: list[tuple[int, ...]]                       # neighbor region ids, per region
    intersections: dict[tuple[int, int], tuple[int, ...]]  # (p, q) -> perimeter_p ∩ members_q

    def region(self, p: int) -> CavityRegion:
        return self.regions[p]


def build_collection(graph: FactorGraph, member_sets: Sequence[Iterable[int]]) -> RegionCollection:
    """Assemble a collection; every graph variable must be covered by members."""
    regions = [make_region(graph, ms, region_id=p) for p, ms in enumerate(member_sets)]
    covered = set()
    total = 0
    for r in regions:
        covered |= set(r.members)
        total += len(r.members)
    if covered != set(range(graph.n_vars)):
        missing = sorted(set(range(graph.n_vars)) - covered)
        raise ConstructionError(f"coverage violated: variables {missing} in no region")
    is_partition = total == graph.n_vars
    intersections: dict[tuple[int, int], tuple[int, ...]] = {}
    nb: list[tuple[int, ...]] = []
    for p, rp in enumerate(regions):
        perim = set(rp.perimeter)
        neighbors = []
        for q, rq in enumerate(regions):
            if q == p:
                continue
            inter = tuple(sorted(perim & set(rq.members)))
            if inter:
                intersections[(p, q)] = inter
                neighbors.append(q)
        nb.append(tuple(neighbors))
    return RegionCollection(regions, is_partition, nb, intersections)


def partition_single_variables(graph: FactorGraph) -> RegionCollection:
    """One region per variable; always a partition."""
    return build_collection(graph, [(v,) for v in range(graph.n_vars)])


def _cover_leftovers(graph: FactorGraph, sets: list[tuple[int, ...]]) -> list[tuple[int, ...]]:
    covered = {v for s in sets for v in s}
    for v in range(graph.n_vars):
        if v not in covered:
            sets.append((v,))  # coverage is required; isolated variables get singletons
    return sets


def clusters_factor_domains(graph: FactorGraph) -> RegionCollection:
    """One region per distinct factor scope (plus singletons for isolated variables)."""
    seen = set()
    sets: list[tuple[int, ...]] = []
    for f in graph.factors:
        key = tuple(sorted(f.scope))
        if key not in seen:
            seen.add(key)
            sets.append(key)
    return build_collection(graph, _cover_leftovers(graph, sets))


def cooccurrence_adjacency(graph: FactorGraph) -> list[set[int]]:
    adj: list[set[int]] = [set() for _ in range(graph.n_vars)]
    for f in graph.factors:
        for i, a in enumerate(f.scope):
            for b in f.scope[i + 1:]:
                adj[a].add(b)
                adj[b].add(a)
    return adj


def simple_cycles_upto(adj: list[set[int]], max_len: int) -> list[tuple[int, ...]]:
    """All simple cycles of length <= max_len, as sorted vertex tuples.

    Each cycle is enumerated once: paths start at their smallest vertex and the
    second vertex is required to be smaller than the last to kill the mirrored
    orientation.
    """
    cycles = set()
    n = len(adj)
    for start in range(n):
        path = [start]
        on_path = {start}

        def extend():
            v = path[-1]
            for u in sorted(adj[v]):
                if u == start and len(path) >= 3 and path[1] < path[-1]:
                    cycles.add(tuple(sorted(path)))
                elif u > start and u not in on_path and len(path) < max_len:
                    path.append(u)
                    on_path.add(u)
                    extend()
                    path.pop()
                    on_path.discard(u)

        extend()
    return sorted(cycles)


def clusters_loops(graph: FactorGraph, max_len: int) -> RegionCollection:
    """Loop clusters of length <= max_len; factors outside every loop become
    their own cluster."""
    if max_len < 3:
        raise ValueError("max_len must be >= 3")
    adj = cooccurrence_adjacency(graph)
    sets = simple_cycles_upto(adj, max_len)
    loop_sets = [set(s) for s in sets]
    seen = {tuple(s) for s in sets}
    out = list(sets)
    for f in graph.factors:
        scope = set(f.scope)
        if not any(scope <= ls for ls in loop_sets):
            key = tuple(sorted(scope))
            if key not in seen:
                seen.add(key)
                out.append(key)
    return build_collection(graph, _cover_leftovers(graph, out))


def collection_to_json(collection: RegionCollection) -> str:
    return json.dumps({"regions": [list(r.members) for r in collection.regions]})


def collection_from_json(text: str, graph: FactorGraph) -> RegionCollection:
    d = json.loads(text)
    return build_collection(graph, [tuple(ms) for ms in d["regions"]])
