"""Seeded model generators for the benchmark suite.

All randomness flows through PCG64 streams keyed by numpy SeedSequences; an
experiment instance k under root seed s uses the stream for entropy (s, k),
and Gaussians are drawn by the inverse-CDF transform of the stream's uniform
doubles, so a seed pins every generated model exactly.

Spin models use state index 0 for spin -1 and index 1 for spin +1; a coupling
J between i and j contributes exp(J * s_i * s_j) and a local field t
contributes exp(t * s_i).
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtri

from .factor_graph import Factor, FactorGraph


def rng_for(entropy) -> np.random.Generator:
    """PCG64 stream for an integer or tuple-of-integers entropy key."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def instance_seed(seed: int, instance: int) -> tuple[int, int]:
    """Stream-splitting rule: instance k of root seed s draws from (s, k)."""
    return (int(seed), int(instance))


def gaussians(rng: np.random.Generator, n: int, std: float) -> np.ndarray:
    """N(0, std^2) draws via the inverse normal CDF of uniform doubles."""
    if n == 0:
        return np.zeros(0)
    u = rng.random(n)
    return std * ndtri(u)


def _spin_unary(theta: float) -> np.ndarray:
    return np.array([math.exp(-theta), math.exp(theta)])


def _spin_pairwise(j: float) -> np.ndarray:
    agree, disagree = math.exp(j), math.exp(-j)
    return np.array([[agree, disagree], [disagree, agree]])


def grid_edges(n: int, periodic: bool) -> list[tuple[int, int]]:
    """4-neighbor edges of an n x n grid, row-major ids, deduplicated."""
    edges: list[tuple[int, int]] = []
    seen = set()
    for i in range(n):
        for j in range(n):
            v = i * n + j
            right = i * n + (j + 1) % n if periodic or j + 1 < n else None
            down = ((i + 1) % n) * n + j if periodic or i + 1 < n else None
            for u in (right, down):
                if u is None or u == v:
                    continue
                key = (min(v, u), max(v, u))
                if key not in seen:
                    seen.add(key)
                    edges.append(key)
    return edges


def gen_ising_grid(n: int, periodic: bool, beta: float, seed) -> FactorGraph:
    """Spin grid: local fields from N(0,1), couplings from N(0, beta^2)."""
    if n < 2:
        raise ValueError("grid side length must be >= 2")
    rng = rng_for(seed)
    n_vars = n * n
    thetas = gaussians(rng, n_vars, 1.0)
    edges = grid_edges(n, periodic)
    js = gaussians(rng, len(edges), beta)
    factors = [Factor((v,), _spin_unary(thetas[v])) for v in range(n_vars)]
    factors += [Factor(e, _spin_pairwise(j)) for e, j in zip(edges, js)]
    return FactorGraph((2,) * n_vars, tuple(factors))


def gen_random_table_grid(n: int, periodic: bool, seed) -> FactorGraph:
    """Pairwise grid whose table entries are exp of independent N(0,1) draws."""
    if n < 2:
        raise ValueError("grid side length must be >= 2")
    rng = rng_for(seed)
    edges = grid_edges(n, periodic)
    factors = []
    for e in edges:
        logs = gaussians(rng, 4, 1.0).reshape(2, 2)
        factors.append(Factor(e, np.exp(logs)))
    return FactorGraph((2,) * (n * n), tuple(factors))


def random_regular_edges(n: int, degree: int, seed) -> list[tuple[int, int]]:
    """Uniform simple regular graph via the pairing model; each rejected
    pairing retries on a fresh sub-stream."""
    if (n * degree) % 2 != 0:
        raise ValueError("n * degree must be even")
    if n <= degree:
        raise ValueError("need more vertices than the degree")
    ss = np.random.SeedSequence(seed)
    for attempt_rng in ss.spawn(10000):
        rng = np.random.Generator(np.random.PCG64(attempt_rng))
        stubs = np.repeat(np.arange(n), degree)
        rng.shuffle(stubs)
        pairs = stubs.reshape(-1, 2)
        edges = {(min(int(a), int(b)), max(int(a), int(b))) for a, b in pairs}
        if len(edges) == pairs.shape[0] and all(a != b for a, b in edges):
            return sorted(edges)
    raise RuntimeError("pairing model failed to produce a simple graph")


def gen_regular_ising(n: int, degree: int = 3, beta: float = 1.0, seed=0,
                      field_std: float | None = None) -> FactorGraph:
    """Random regular spin graph; fields and couplings from N(0, beta^2) by
    default (field_std overrides the field scale)."""
    edges = random_regular_edges(n, degree, seed)
    key = (seed,) if isinstance(seed, int) else tuple(seed)
    rng = rng_for(key + (1,))
    thetas = gaussians(rng, n, beta if field_std is None else field_std)
    js = gaussians(rng, len(edges), beta)
    factors = [Factor((v,), _spin_unary(thetas[v])) for v in range(n)]
    factors += [Factor(e, _spin_pairwise(j)) for e, j in zip(edges, js)]
    return FactorGraph((2,) * n, tuple(factors))


def gen_cycle_ising(n: int, beta: float, seed) -> FactorGraph:
    """Single-cycle spin model: fields from N(0,1), couplings from N(0, beta^2)."""
    if n < 3:
        raise ValueError("cycle length must be >= 3")
    rng = rng_for(seed)
    thetas = gaussians(rng, n, 1.0)
    js = gaussians(rng, n, beta)
    factors = [Factor((v,), _spin_unary(thetas[v])) for v in range(n)]
    factors += [Factor((v, (v + 1) % n), _spin_pairwise(js[v])) for v in range(n)]
    return FactorGraph((2,) * n, tuple(factors))


def gen_random_tree(n_vars: int, seed, cards: Sequence[int] = (2, 3)) -> FactorGraph:
    """Random tree with mixed cardinalities and log-normal pairwise tables."""
    rng = rng_for(seed)
    domain = [int(cards[int(i)]) for i in rng.integers(0, len(cards), n_vars)]
    factors = []
    for v in range(1, n_vars):
        parent = int(rng.integers(0, v))
        shape = (domain[parent], domain[v])
        logs = gaussians(rng, shape[0] * shape[1], 1.0).reshape(shape)
        factors.append(Factor((parent, v), np.exp(logs)))
    for v in range(n_vars):
        logs = gaussians(rng, domain[v], 1.0)
        factors.append(Factor((v,), np.exp(logs)))
    return FactorGraph(tuple(domain), tuple(factors))


def factor_graph_girth(graph: FactorGraph) -> float:
    """Length of the shortest cycle in the bipartite variable/factor graph
    (always even); inf for forests."""
    n = graph.n_vars
    adj: list[list[int]] = [[] for _ in range(n + graph.n_factors)]
    for fid, f in enumerate(graph.factors):
        for v in f.scope:
            adj[v].append(n + fid)
            adj[n + fid].append(v)
    best = math.inf
    for start in range(len(adj)):
        dist = {start: 0}
        parent = {start: -1}
        frontier = [start]
        while frontier:
            nxt = []
            for u in frontier:
                for w in adj[u]:
                    if w not in dist:
                        dist[w] = dist[u] + 1
                        parent[w] = u
                        nxt.append(w)
                    elif w != parent[u]:
                        best = min(best, dist[u] + dist[w] + 1)
            frontier = nxt
    return best


def grid_block_partition(n: int, block: int) -> list[tuple[int, ...]]:
    """Member sets of a block x block tiling of an n x n grid (block | n)."""
    if n % block != 0:
        raise ValueError("block size must divide the grid side")
    out = []
    for bi in range(0, n, block):
        for bj in range(0, n, block):
            out.append(tuple(i * n + j
                             for i in range(bi, bi + block)
                             for j in range(bj, bj + block)))
    return out
