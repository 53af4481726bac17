"""Discrete factor graphs: variables with finite domains and tabular factors.

Variable and factor ids are dense integers.  Factor tables are dense numpy
arrays whose axes follow the factor's declared scope order (row-major over
that order, matching the UAI file convention).  Graphs are immutable after
construction; operations return new graphs, so any of them may be called
concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import tables
from .errors import DegenerateTableError, UncoveredScopeError
from .tables import DistTable

VariableId = int
FactorId = int


@dataclass
class Factor:
    scope: tuple[VariableId, ...]
    values: np.ndarray

    def __post_init__(self):
        self.scope = tuple(int(v) for v in self.scope)
        self.values = np.asarray(self.values, dtype=np.float64)

    def as_table(self) -> DistTable:
        return tables.canonical(self.scope, self.values)


@dataclass
class FactorGraph:
    """Bipartite variable/factor structure with validated tabular factors.

    `log_offset` is a scalar folded out of the factor product, so the
    unnormalized measure is exp(log_offset) * prod_I psi_I(x_I).  Clamping
    uses it to keep track of fully-instantiated factors.
    """

    cards: tuple[int, ...]
    factors: tuple[Factor, ...]
    log_offset: float = 0.0
    var_factors: tuple[tuple[FactorId, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        self.cards = tuple(int(c) for c in self.cards)
        self.factors = tuple(self.factors)
        if any(c < 1 for c in self.cards):
            raise ValueError("variable cardinalities must be >= 1")
        n = len(self.cards)
        incidence: list[list[FactorId]] = [[] for _ in range(n)]
        for fid, f in enumerate(self.factors):
            if len(set(f.scope)) != len(f.scope):
                raise ValueError(f"factor {fid} has repeated variables in scope")
            if any(v < 0 or v >= n for v in f.scope):
                raise ValueError(f"factor {fid} scope out of range")
            expect = tuple(self.cards[v] for v in f.scope)
            if f.values.shape != expect:
                raise ValueError(f"factor {fid} table shape {f.values.shape} != {expect}")
            if np.any(f.values < 0):
                raise ValueError(f"factor {fid} has negative entries")
            if not np.any(f.values > 0):
                raise ValueError(f"factor {fid} is identically zero")
            for v in f.scope:
                incidence[v].append(fid)
        self.var_factors = tuple(tuple(fs) for fs in incidence)

    @property
    def n_vars(self) -> int:
        return len(self.cards)

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    def neighbors(self, v: VariableId) -> tuple[FactorId, ...]:
        """N(v): ids of factors whose scope contains v."""
        return self.var_factors[v]

    def scope_set(self, fid: FactorId) -> frozenset[VariableId]:
        return frozenset(self.factors[fid].scope)


def product_eval(graph: FactorGraph, factor_set: Iterable[FactorId],
                 assignment: Mapping[VariableId, int]) -> float:
    """Product of the selected factor entries at `assignment` (empty set -> 1)."""
    out = 1.0
    for fid in factor_set:
        f = graph.factors[fid]
        try:
            idx = tuple(assignment[v] for v in f.scope)
        except KeyError as e:
            raise UncoveredScopeError(f"uncovered scope: variable {e.args[0]} unassigned")
        out *= float(f.values[idx])
    return out


def clamp(graph: FactorGraph, assignment: Mapping[VariableId, int]) -> FactorGraph:
    """Slice every factor at the assigned values and drop the assigned variables.

    Remaining variables are reindexed contiguously in ascending order of their
    original ids, so old id i maps to `sorted(set(range(n)) - assigned).index(i)`.
    Factors left with an empty scope fold their scalar value into the returned
    graph's log_offset; a factor sliced to an all-zero table makes the clamped
    measure identically zero, recorded as a -inf log_offset.
    """
    for v, x in assignment.items():
        if v < 0 or v >= graph.n_vars:
            raise ValueError(f"assignment names unknown variable {v}")
        if x < 0 or x >= graph.cards[v]:
            raise ValueError(f"value {x} out of domain for variable {v}")
    assigned = set(assignment)
    remaining = [v for v in range(graph.n_vars) if v not in assigned]
    new_id = {v: i for i, v in enumerate(remaining)}
    log_off = graph.log_offset
    new_factors = []
    for f in graph.factors:
        index = tuple(assignment[v] if v in assigned else slice(None) for v in f.scope)
        sliced = f.values[index]
        free = tuple(v for v in f.scope if v not in assigned)
        if not free:
            val = float(sliced)
            log_off += math.log(val) if val > 0 else -math.inf
        elif not np.any(sliced > 0):
            log_off = -math.inf
        else:
            new_factors.append(Factor(tuple(new_id[v] for v in free), sliced))
    return FactorGraph(tuple(graph.cards[v] for v in remaining), tuple(new_factors), log_off)


def remove_factors(graph: FactorGraph, drop: Iterable[FactorId]) -> FactorGraph:
    """Same graph without the dropped factors; variables stay, even isolated."""
    drop = set(drop)
    if not drop <= set(range(graph.n_factors)):
        raise ValueError("drop set contains unknown factor ids")
    kept = tuple(f for fid, f in enumerate(graph.factors) if fid not in drop)
    return FactorGraph(graph.cards, kept, graph.log_offset)


def factor_product_table(graph: FactorGraph, factor_set: Iterable[FactorId]) -> DistTable:
    """ψ product over a factor set as a canonical table (empty set -> scalar 1)."""
    return tables.product([graph.factors[fid].as_table() for fid in factor_set], graph.cards)
