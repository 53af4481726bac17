"""Dense table algebra over ordered discrete-variable scopes.

A table maps joint assignments of its scope variables to non-negative reals,
stored as a dense numpy array whose axes follow the scope order.  Every table
exchanged between modules uses the canonical scope order (ascending variable
id); `canonical` converts from an arbitrary declared order.  An optional scalar
log-offset keeps values in a safe floating range without switching the table
itself to log space, which would make the ratio updates awkward around zeros.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateTableError, UncoveredScopeError

Scope = tuple[int, ...]


@dataclass
class DistTable:
    """Non-negative table over `scope` (ascending variable ids).

    `values * exp(log_offset)` is the represented table.  `normalized` tables
    have log_offset 0 and entries summing to 1.
    """

    scope: Scope
    values: np.ndarray
    log_offset: float = 0.0
    normalized: bool = False

    def __post_init__(self):
        self.scope = tuple(self.scope)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != len(self.scope):
            raise ValueError("table rank does not match scope length")
        if any(self.scope[i] >= self.scope[i + 1] for i in range(len(self.scope) - 1)):
            raise ValueError("scope must be strictly ascending")

    @property
    def cards(self) -> Scope:
        return self.values.shape

    def total(self) -> float:
        return float(self.values.sum()) * float(np.exp(self.log_offset))


def canonical(scope: Sequence[int], values: np.ndarray) -> DistTable:
    """Build a DistTable from a table declared in arbitrary scope order."""
    scope = tuple(scope)
    values = np.asarray(values, dtype=np.float64)
    perm = tuple(np.argsort(scope))
    return DistTable(tuple(scope[i] for i in perm), values.transpose(perm))


def uniform(scope: Sequence[int], cards: Sequence[int]) -> DistTable:
    """Uniform normalized table over `scope` (cards indexed by variable id)."""
    scope = tuple(sorted(scope))
    shape = tuple(cards[v] for v in scope)
    n = int(np.prod(shape)) if shape else 1
    return DistTable(scope, np.full(shape, 1.0 / n), normalized=True)


def scalar(value: float = 1.0) -> DistTable:
    return DistTable((), np.asarray(value, dtype=np.float64))


def _broadcast_shape(scope: Scope, shape: Scope, target: Scope, target_shape: Scope) -> Scope:
    out = []
    j = 0
    for v, c in zip(target, target_shape):
        if j < len(scope) and scope[j] == v:
            out.append(shape[j])
            j += 1
        else:
            out.append(1)
    if j != len(scope):
        raise UncoveredScopeError(f"scope {scope} not contained in {target}")
    return tuple(out)


def aligned_values(t: DistTable, target: Scope, cards: Sequence[int]) -> np.ndarray:
    """View of t.values broadcastable against a table over `target` ⊇ t.scope."""
    target_shape = tuple(cards[v] for v in target)
    return t.values.reshape(_broadcast_shape(t.scope, t.values.shape, target, target_shape))


def product(tables: Iterable[DistTable], cards: Sequence[int]) -> DistTable:
    """Pointwise product over the union scope; empty input gives the scalar 1."""
    tables = list(tables)
    union: Scope = tuple(sorted(set().union(*(t.scope for t in tables)))) if tables else ()
    shape = tuple(cards[v] for v in union)
    out = np.ones(shape)
    off = 0.0
    for t in tables:
        out = out * aligned_values(t, union, cards)
        off += t.log_offset
    return DistTable(union, out, log_offset=off)


def marginalize(t: DistTable, keep: Iterable[int]) -> DistTable:
    """Sum out every scope variable not in `keep` (must be a subset of scope)."""
    keep = set(keep)
    if not keep <= set(t.scope):
        raise UncoveredScopeError(f"keep set {sorted(keep)} not within scope {t.scope}")
    axes = tuple(i for i, v in enumerate(t.scope) if v not in keep)
    out_scope = tuple(v for v in t.scope if v in keep)
    values = t.values.sum(axis=axes) if axes else t.values.copy()
    return DistTable(out_scope, values, log_offset=t.log_offset)


def normalize(t: DistTable) -> DistTable:
    s = float(t.values.sum())
    if not s > 0.0 or not np.isfinite(s):
        raise DegenerateTableError("zero or non-finite normalizer")
    return DistTable(t.scope, t.values / s, log_offset=0.0, normalized=True)


def rescaled(t: DistTable) -> DistTable:
    """Move the max entry into the log offset; preserves the represented table."""
    m = float(t.values.max()) if t.values.size else 0.0
    if m <= 0.0:
        return t
    return DistTable(t.scope, t.values / m, log_offset=t.log_offset + float(np.log(m)))


def power(t: DistTable, exponent: float) -> DistTable:
    if exponent == 1.0:
        return t
    return DistTable(t.scope, np.power(t.values, exponent), log_offset=t.log_offset * exponent)


def ratio(num: np.ndarray, den: np.ndarray, context: str = "table ratio") -> np.ndarray:
    """Entrywise num/den with 0/0 -> 0; positive/0 raises."""
    bad = (den == 0) & (num != 0)
    if np.any(bad):
        raise DegenerateTableError(f"zero denominator with nonzero numerator in {context}")
    out = np.zeros(np.broadcast_shapes(num.shape, den.shape))
    ok = den != 0
    np.divide(np.broadcast_to(num, out.shape), np.broadcast_to(den, out.shape),
              out=out, where=ok)
    return out


def max_abs_diff(a: DistTable, b: DistTable) -> float:
    if a.scope != b.scope:
        raise ValueError(f"scope mismatch {a.scope} vs {b.scope}")
    return float(np.abs(a.values - b.values).max()) if a.values.size else 0.0
