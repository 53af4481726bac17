"""Exact inference oracles: brute-force enumeration and variable elimination.

Both compute marginals and the log partition function; variable elimination
uses greedy min-fill ordering (ties broken by lowest variable id) and keeps a
running log offset per intermediate table so large couplings do not overflow.
These are the reference values every approximate method is measured against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import tables
from .errors import TooLargeError
from .factor_graph import FactorGraph
from .tables import DistTable

ENUMERATION_GUARD = 2 ** 24
WIDTH_GUARD = 2 ** 26


@dataclass
class ExactResult:
    log_z: float
    singles: list[DistTable]


def brute_force_joint(graph: FactorGraph, guard: int = ENUMERATION_GUARD) -> DistTable:
    """Full normalized joint over all variables by direct enumeration."""
    size = int(np.prod(graph.cards, dtype=np.int64)) if graph.cards else 1
    if size > guard:
        raise TooLargeError(f"too large for enumeration: {size} joint states")
    full = tables.product([f.as_table() for f in graph.factors], graph.cards)
    scope = tuple(range(graph.n_vars))
    shape = tuple(graph.cards)
    values = np.broadcast_to(tables.aligned_values(full, scope, graph.cards), shape)
    return tables.normalize(DistTable(scope, np.array(values)))


def brute_force_log_z(graph: FactorGraph, guard: int = ENUMERATION_GUARD) -> float:
    size = int(np.prod(graph.cards, dtype=np.int64)) if graph.cards else 1
    if size > guard:
        raise TooLargeError(f"too large for enumeration: {size} joint states")
    full = tables.product([f.as_table() for f in graph.factors], graph.cards)
    # variables absent from every factor contribute their domain size
    missing = [c for v, c in enumerate(graph.cards) if v not in set(full.scope)]
    total = float(full.values.sum())
    if total <= 0:
        return -np.inf
    return float(np.log(total) + np.sum(np.log(missing)) + full.log_offset + graph.log_offset)


def _min_fill_order(cards: Sequence[int], scopes: list[set[int]], elim: set[int]) -> list[int]:
    adj: dict[int, set[int]] = {v: set() for v in elim}
    for s in scopes:
        for v in s:
            if v in adj:
                adj[v] |= s - {v}
    order = []
    remaining = set(elim)
    while remaining:
        best, best_fill = None, None
        for v in sorted(remaining):
            nbrs = [u for u in adj[v] if u != v]
            fill = sum(1 for i, a in enumerate(nbrs) for b in nbrs[i + 1:]
                       if b not in adj.get(a, ()) and a not in adj.get(b, ()))
            if best_fill is None or fill < best_fill:
                best, best_fill = v, fill
        nbrs = adj.pop(best) - {best}
        for a in nbrs:
            if a in adj:
                adj[a] |= nbrs - {a}
                adj[a].discard(best)
        for u in adj:
            adj[u].discard(best)
        remaining.discard(best)
        order.append(best)
    return order


def variable_elimination(graph: FactorGraph, query: Iterable[int],
                         max_table_entries: int = WIDTH_GUARD) -> tuple[DistTable, float]:
    """Exact normalized marginal over `query` and exact log Z.

    Raises TooLargeError when an intermediate table under the min-fill order
    would exceed `max_table_entries`.
    """
    query = tuple(sorted(set(query)))
    work = [f.as_table() for f in graph.factors]
    log_acc = graph.log_offset
    touched = set().union(*(set(t.scope) for t in work)) if work else set()
    for v in range(graph.n_vars):
        if v in touched or v in query:
            continue
        log_acc += np.log(graph.cards[v])  # isolated variable sums to |X_v|
    elim = touched - set(query)
    order = _min_fill_order(graph.cards, [set(t.scope) for t in work], elim)
    for v in order:
        bucket = [t for t in work if v in t.scope]
        work = [t for t in work if v not in t.scope]
        union = sorted(set().union(*(set(t.scope) for t in bucket)))
        size = int(np.prod([graph.cards[u] for u in union], dtype=np.int64))
        if size > max_table_entries:
            raise TooLargeError(f"elimination width guard exceeded at variable {v}: "
                                f"{size} entries")
        prod = tables.product(bucket, graph.cards)
        summed = tables.marginalize(prod, set(union) - {v})
        summed = tables.rescaled(summed)
        log_acc += summed.log_offset
        if float(summed.values.max() if summed.values.size else 0.0) <= 0.0:
            return tables.uniform(query, graph.cards), -np.inf
        work.append(DistTable(summed.scope, summed.values))
    final = tables.product(work, graph.cards)
    log_acc += final.log_offset
    shape = tuple(graph.cards[v] for v in query)
    values = np.broadcast_to(tables.aligned_values(
        DistTable(final.scope, final.values), query, graph.cards), shape)
    total = float(values.sum()) if values.size else float(final.values)
    if total <= 0.0:
        return tables.uniform(query, graph.cards), -np.inf
    log_z = float(np.log(total) + log_acc)
    marginal = DistTable(query, np.array(values) / total, normalized=True)
    return marginal, log_z


def log_partition(graph: FactorGraph, max_table_entries: int = WIDTH_GUARD) -> float:
    return variable_elimination(graph, (), max_table_entries)[1]


def exact_singles(graph: FactorGraph, max_table_entries: int = WIDTH_GUARD) -> ExactResult:
    """Per-variable exact marginals (one elimination run per variable)."""
    log_z = log_partition(graph, max_table_entries)
    singles = [variable_elimination(graph, (v,), max_table_entries)[0]
               for v in range(graph.n_vars)]
    return ExactResult(log_z, singles)
