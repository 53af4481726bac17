"""Sum-product loopy belief propagation with Bethe partition-function estimates.

The engine is batched: it iterates B independent message-passing problems that
share one graph structure but have different factor tables.  Cavity estimation
uses this to sweep all clamped perimeter assignments at once; a plain LBP run
is a batch of size 1.  Batch elements are frozen the moment they individually
converge, so every element follows exactly the trajectory a standalone run
would, and results do not depend on what else is in the batch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tables
from .factor_graph import FactorGraph
from .tables import DistTable

log = logging.getLogger(__name__)


@dataclass
class LBPOptions:
    max_iters: int = 10000
    tolerance: float = 1e-9
    damping: float = 0.0
    schedule: str = "sequential-fixed"  # or "random-permutation"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must be in [0, 1)")
        if self.schedule not in ("sequential-fixed", "random-permutation"):
            raise ValueError(f"unknown schedule {self.schedule!r}")


@dataclass
class LBPResult:
    singles: list[DistTable]
    factor_beliefs: list[DistTable]
    converged: bool
    iterations: int
    bethe_log_z: float
    messages: dict[tuple[int, int], np.ndarray] = field(default_factory=dict, repr=False)


class BatchedSumProduct:
    """Message passing over B table-batches sharing one incidence structure.

    `factors` is a list of (scope, values) where values has shape (B, *table).
    `active_vars` lists the variables that exist in the batched problems (an
    isolated variable still contributes its entropy term to the Bethe value).
    The sweep itself runs in a compiled kernel over a flattened layout; batch
    elements are frozen once converged, so each element's trajectory matches
    a standalone run exactly.
    """

    def __init__(self, cards: Sequence[int], active_vars: Sequence[int],
                 factors: list[tuple[tuple[int, ...], np.ndarray]],
                 offsets: np.ndarray, opts: LBPOptions):
        self.cards = cards
        self.active_vars = list(active_vars)
        self.scopes = [tuple(s) for s, _ in factors]
        self.values = [np.asarray(v, dtype=np.float64) for _, v in factors]
        self.offsets = np.asarray(offsets, dtype=np.float64)
        self.batch = int(self.offsets.shape[0])
        self.opts = opts
        self.var_edges: dict[int, list[tuple[int, int]]] = {v: [] for v in self.active_vars}
        for f, scope in enumerate(self.scopes):
            for pos, v in enumerate(scope):
                self.var_edges[v].append((f, pos))
        self.iterations = np.zeros(self.batch, dtype=np.int64)
        self.converged = np.zeros(self.batch, dtype=bool)
        self._lower()

    def _lower(self) -> None:
        B = self.batch
        n_edges = sum(len(s) for s in self.scopes)
        self._scope_off = np.zeros(len(self.scopes) + 1, dtype=np.int64)
        self._edge_var = np.zeros(n_edges, dtype=np.int64)
        self._edge_card = np.zeros(n_edges, dtype=np.int64)
        self._edge_stride = np.ones(n_edges, dtype=np.int64)
        self._edge_factor = np.zeros(n_edges, dtype=np.int64)
        self._msg_off = np.zeros(n_edges, dtype=np.int64)
        self._tab_off = np.zeros(len(self.scopes), dtype=np.int64)
        self._tab_size = np.zeros(len(self.scopes), dtype=np.int64)
        e = 0
        msg_total = 0
        tab_total = 0
        for f, scope in enumerate(self.scopes):
            self._scope_off[f + 1] = self._scope_off[f] + len(scope)
            size = int(np.prod([self.cards[v] for v in scope]))
            self._tab_off[f] = tab_total
            self._tab_size[f] = size
            tab_total += B * size
            stride = size
            for pos, v in enumerate(scope):
                stride //= self.cards[v]
                self._edge_var[e] = v
                self._edge_card[e] = self.cards[v]
                self._edge_stride[e] = stride
                self._edge_factor[e] = f
                self._msg_off[e] = msg_total
                msg_total += B * self.cards[v]
                e += 1
        self._tab_data = np.empty(tab_total)
        for f in range(len(self.scopes)):
            flat = self.values[f].reshape(B, -1)
            self._tab_data[self._tab_off[f]:self._tab_off[f] + flat.size] = flat.ravel()
        self._msg_data = np.empty(msg_total)
        for e in range(n_edges):
            c = self._edge_card[e]
            self._msg_data[self._msg_off[e]:self._msg_off[e] + B * c] = 1.0 / c
        n_vars = len(self.cards)
        self._var_edge_off = np.zeros(n_vars + 1, dtype=np.int64)
        counts = np.zeros(n_vars, dtype=np.int64)
        for e in range(n_edges):
            counts[self._edge_var[e]] += 1
        self._var_edge_off[1:] = np.cumsum(counts)
        self._var_edge_flat = np.zeros(n_edges, dtype=np.int64)
        fill = self._var_edge_off[:-1].copy()
        for e in range(n_edges):
            v = self._edge_var[e]
            self._var_edge_flat[fill[v]] = e
            fill[v] += 1
        self._max_k = max((len(s) for s in self.scopes), default=1)
        self._max_card = max((self.cards[v] for v in self.active_vars), default=1)

    def message(self, f: int, pos: int) -> np.ndarray:
        """(batch, card) view of the current factor->variable message."""
        e = int(self._scope_off[f]) + pos
        c = int(self._edge_card[e])
        off = int(self._msg_off[e])
        return self._msg_data[off:off + self.batch * c].reshape(self.batch, c)

    def run(self) -> None:
        from .lbp_kernel import sweep_kernel
        rng = np.random.default_rng(np.random.PCG64(self.opts.seed))
        active = np.ones(self.batch, dtype=bool)
        n_factors = len(self.scopes)
        fixed_order = np.arange(n_factors, dtype=np.int64)
        for sweep in range(1, self.opts.max_iters + 1):
            if self.opts.schedule == "random-permutation":
                order = rng.permutation(n_factors).astype(np.int64)
            else:
                order = fixed_order
            change = sweep_kernel(
                order, self._scope_off, self._edge_var, self._edge_card,
                self._edge_stride, self._edge_factor, self._var_edge_off,
                self._var_edge_flat, self._tab_off, self._tab_size, self._tab_data,
                self._msg_off, self._msg_data, active, float(self.opts.damping),
                self.batch, self._max_k, self._max_card)
            done_now = active & (change < self.opts.tolerance)
            self.iterations[active] = sweep
            self.converged |= done_now
            active &= ~done_now
            if n_factors == 0 or not active.any():
                break

    def _var_to_factor(self, f: int) -> list[np.ndarray]:
        out = []
        for v in self.scopes[f]:
            prod = np.ones((self.batch, self.cards[v]))
            for g, gpos in self.var_edges[v]:
                if g != f:
                    prod = prod * self.message(g, gpos)
            s = prod.sum(axis=1, keepdims=True)
            np.divide(prod, s, out=prod, where=s > 0)
            out.append(prod)
        return out

    def var_beliefs(self) -> dict[int, np.ndarray]:
        out = {}
        for v in self.active_vars:
            prod = np.ones((self.batch, self.cards[v]))
            for f, pos in self.var_edges[v]:
                prod = prod * self.message(f, pos)
            s = prod.sum(axis=1, keepdims=True)
            fallback = np.full_like(prod, 1.0 / self.cards[v])
            out[v] = np.divide(prod, s, out=fallback, where=s > 0)
        return out

    def factor_belief(self, f: int) -> np.ndarray:
        scope = self.scopes[f]
        k = len(scope)
        v2f = self._var_to_factor(f)
        tmp = self.values[f]
        for pos in range(k):
            shape = [self.batch] + [1] * k
            shape[1 + pos] = self.cards[scope[pos]]
            tmp = tmp * v2f[pos].reshape(shape)
        axes = tuple(range(1, k + 1))
        s = tmp.sum(axis=axes, keepdims=True)
        fallback = np.full_like(tmp, 1.0 / max(tmp[0].size, 1))
        return np.divide(tmp, s, out=fallback, where=s > 0)

    def bethe_log_z(self) -> np.ndarray:
        """-F_Bethe per batch element, including the per-element log offsets."""
        out = self.offsets.copy()
        for f in range(len(self.scopes)):
            b = self.factor_belief(f)
            psi = self.values[f]
            log_psi = np.log(np.where(psi > 0, psi, 1.0))
            log_b = np.log(np.where(b > 0, b, 1.0))
            term = np.where(b > 0, b * (log_psi - log_b), 0.0)
            out += term.sum(axis=tuple(range(1, term.ndim)))
        beliefs = self.var_beliefs()
        for v in self.active_vars:
            b = beliefs[v]
            ent = np.where(b > 0, b * np.log(np.where(b > 0, b, 1.0)), 0.0).sum(axis=1)
            out += (len(self.var_edges[v]) - 1) * ent
        return out


def run_lbp(graph: FactorGraph, opts: LBPOptions | None = None) -> LBPResult:
    """Standard sum-product iteration; non-convergence is reported, not raised."""
    opts = opts or LBPOptions()
    factors = [(f.scope, f.values[None, ...]) for f in graph.factors]
    engine = BatchedSumProduct(graph.cards, range(graph.n_vars), factors,
                               np.array([graph.log_offset]), opts)
    engine.run()
    beliefs = engine.var_beliefs()
    singles = [DistTable((v,), beliefs[v][0], normalized=True) for v in range(graph.n_vars)]
    factor_beliefs = [tables.canonical(f.scope, engine.factor_belief(fid)[0])
                      for fid, f in enumerate(graph.factors)]
    messages = {}
    for fid, f in enumerate(graph.factors):
        for pos, v in enumerate(f.scope):
            messages[(fid, v)] = engine.message(fid, pos)[0].copy()
    return LBPResult(
        singles=singles,
        factor_beliefs=[tables.normalize(t) for t in factor_beliefs],
        converged=bool(engine.converged[0]),
        iterations=int(engine.iterations[0]),
        bethe_log_z=float(engine.bethe_log_z()[0]),
        messages=messages,
    )


def bethe_log_z(graph: FactorGraph, result: LBPResult) -> float:
    """Bethe estimate of log Z from converged (or final) beliefs.

    Factor terms combine energy and entropy; single-variable entropies are
    weighted by 1 - |N(i)|.  Exact on trees.  0*log(0) is treated as 0.
    """
    out = graph.log_offset
    for fid, f in enumerate(graph.factors):
        psi = f.as_table().values
        b = result.factor_beliefs[fid].values
        log_psi = np.log(np.where(psi > 0, psi, 1.0))
        log_b = np.log(np.where(b > 0, b, 1.0))
        out += float(np.where(b > 0, b * (log_psi - log_b), 0.0).sum())
    for v in range(graph.n_vars):
        b = result.singles[v].values
        ent = float(np.where(b > 0, b * np.log(np.where(b > 0, b, 1.0)), 0.0).sum())
        out += (len(graph.var_factors[v]) - 1) * ent
    return float(out)
