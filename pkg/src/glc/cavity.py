"""Cavity regions and cavity-distribution estimation.

A cavity region is a connected variable subset r; its derived sets are the
incident factors N(r), their variable closure, and the perimeter (closure
minus members).  The cavity distribution over the perimeter is either uniform
or estimated by clamping: remove N(r), fix the perimeter to each assignment,
and estimate the remaining partition function (Bethe via LBP, or exact via
variable elimination).  The clamp sweep runs all assignments as one message
passing batch; per-assignment results are identical to independent runs.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import tables
from .errors import NotACavityRegionError, TooLargeError, DegenerateTableError
from .exact import log_partition
from .factor_graph import FactorGraph, clamp, remove_factors
from .lbp import BatchedSumProduct, LBPOptions
from .tables import DistTable

log = logging.getLogger(__name__)

PERIMETER_GUARD = 2 ** 16


@dataclass
class CavityRegion:
    id: int
    members: tuple[int, ...]
    n_r: tuple[int, ...]        # incident factor ids
    plus_r: tuple[int, ...]     # union of incident factor scopes
    perimeter: tuple[int, ...]  # plus_r minus members


@dataclass
class CavityTable:
    region_id: int
    table: DistTable            # normalized, over the region perimeter
    provenance: str             # uniform | clamped-lbp | clamped-exact
    nonconverged: tuple[int, ...] = ()


def make_region(graph: FactorGraph, members: Iterable[int], region_id: int = 0) -> CavityRegion:
    """Validate connectivity and compute the derived sets of a cavity region."""
    members = tuple(sorted(set(members)))
    if not members:
        raise NotACavityRegionError("not a cavity region: empty member set")
    if any(v < 0 or v >= graph.n_vars for v in members):
        raise NotACavityRegionError("not a cavity region: unknown variable id")
    member_set = set(members)
    # connected iff members are linked pairwise through shared factors
    seen = {members[0]}
    stack = [members[0]]
    while stack:
        v = stack.pop()
        for fid in graph.var_factors[v]:
            for u in graph.factors[fid].scope:
                if u in member_set and u not in seen:
                    seen.add(u)
                    stack.append(u)
    if seen != member_set:
        raise NotACavityRegionError(f"not a cavity region: members {members} are disconnected")
    n_r = tuple(sorted({fid for v in members for fid in graph.var_factors[v]}))
    plus_r = tuple(sorted({u for fid in n_r for u in graph.factors[fid].scope}))
    perimeter = tuple(v for v in plus_r if v not in member_set)
    return CavityRegion(region_id, members, n_r, plus_r, perimeter)


def cavity_uniform(graph: FactorGraph, region: CavityRegion) -> CavityTable:
    return CavityTable(region.id, tables.uniform(region.perimeter, graph.cards), "uniform")


def _perimeter_assignments(cards: tuple[int, ...]) -> np.ndarray:
    """All joint assignments, rows in row-major order over the perimeter scope."""
    if not cards:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices(cards).reshape(len(cards), -1).T
    return np.ascontiguousarray(grids)


def _batched_clamped_tables(reduced: FactorGraph, perimeter: tuple[int, ...],
                            assignments: np.ndarray):
    """Slice every factor of `reduced` at each perimeter assignment at once."""
    batch = assignments.shape[0]
    pos = {v: i for i, v in enumerate(perimeter)}
    offsets = np.full(batch, reduced.log_offset)
    dead = np.zeros(batch, dtype=bool)
    factors = []
    for f in reduced.factors:
        clamped = [i for i, v in enumerate(f.scope) if v in pos]
        free = [i for i, v in enumerate(f.scope) if v not in pos]
        if not clamped:
            factors.append((f.scope, np.broadcast_to(f.values, (batch,) + f.values.shape)))
            continue
        moved = np.ascontiguousarray(f.values.transpose(clamped + free))
        idx = tuple(assignments[:, pos[f.scope[i]]] for i in clamped)
        sliced = moved[idx]
        if not free:
            offsets = offsets + np.where(sliced > 0,
                                         np.log(np.where(sliced > 0, sliced, 1.0)), -np.inf)
            continue
        allzero = ~(sliced > 0).any(axis=tuple(range(1, sliced.ndim)))
        if allzero.any():
            dead |= allzero
            keep = allzero.reshape((batch,) + (1,) * (sliced.ndim - 1))
            sliced = np.where(keep, 1.0, sliced)
        factors.append((tuple(f.scope[i] for i in free), sliced))
    return factors, offsets, dead


def cavity_estimate_clamp(graph: FactorGraph, region: CavityRegion,
                          method: str = "lbp", opts: LBPOptions | None = None,
                          guard: int = PERIMETER_GUARD) -> CavityTable:
    """Cavity table proportional to the clamped partition functions Z_{x_perim}.

    Removes the region's incident factors, fixes the perimeter to each joint
    assignment, and estimates the leftover Z (Bethe for method="lbp", exact
    variable elimination for method="exact").  Normalization happens in log
    space by max subtraction, so wide dynamic ranges are safe.
    """
    if method not in ("lbp", "exact"):
        raise ValueError(f"unknown cavity method {method!r}")
    perim_cards = tuple(graph.cards[v] for v in region.perimeter)
    n_assign = int(np.prod(perim_cards, dtype=np.int64)) if perim_cards else 1
    if n_assign > guard:
        raise TooLargeError(f"perimeter too large: {n_assign} assignments exceeds guard {guard}")
    reduced = remove_factors(graph, region.n_r)
    assignments = _perimeter_assignments(perim_cards)
    nonconverged: tuple[int, ...] = ()
    if method == "exact":
        log_zs = np.empty(n_assign)
        for b in range(n_assign):
            fixed = dict(zip(region.perimeter, (int(x) for x in assignments[b])))
            log_zs[b] = log_partition(clamp(reduced, fixed))
        provenance = "clamped-exact"
    else:
        factors, offsets, dead = _batched_clamped_tables(reduced, region.perimeter, assignments)
        free_vars = [v for v in range(graph.n_vars) if v not in set(region.perimeter)]
        engine = BatchedSumProduct(graph.cards, free_vars, factors, offsets,
                                   opts or LBPOptions())
        engine.run()
        log_zs = engine.bethe_log_z()
        log_zs[dead] = -np.inf
        bad = np.nonzero(~engine.converged & ~dead)[0]
        if bad.size:
            nonconverged = tuple(int(i) for i in bad)
            log.warning("region %d: clamped LBP did not converge for %d of %d assignments",
                        region.id, bad.size, n_assign)
        provenance = "clamped-lbp"
    finite = np.isfinite(log_zs)
    if not finite.any():
        raise DegenerateTableError(f"region {region.id}: all clamped partition functions are zero")
    weights = np.zeros(n_assign)
    weights[finite] = np.exp(log_zs[finite] - log_zs[finite].max())
    values = (weights / weights.sum()).reshape(perim_cards)
    table = DistTable(region.perimeter, values, normalized=True)
    return CavityTable(region.id, table, provenance, nonconverged)


def cavity_to_json(ct: CavityTable, region: CavityRegion) -> str:
    return json.dumps({
        "region_id": ct.region_id,
        "members": list(region.members),
        "perimeter": list(ct.table.scope),
        "values": [float(x) for x in ct.table.values.ravel()],
        "provenance": ct.provenance,
        "nonconverged": list(ct.nonconverged),
    })


def cavity_from_json(text: str, graph: FactorGraph, region: CavityRegion) -> CavityTable:
    d = json.loads(text)
    if tuple(d["members"]) != region.members or tuple(d["perimeter"]) != region.perimeter:
        raise ValueError("cached cavity table does not match the region")
    shape = tuple(graph.cards[v] for v in region.perimeter)
    values = np.asarray(d["values"], dtype=np.float64).reshape(shape)
    table = tables.normalize(DistTable(region.perimeter, values))
    return CavityTable(d["region_id"], table, d["provenance"], tuple(d.get("nonconverged", ())))
