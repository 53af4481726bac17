"""UAI model file reader/writer (the on-disk model format for the CLI).

Format: a "MARKOV" preamble, variable count, per-variable cardinalities, the
number of factors, one scope line per factor (size followed by variable ids),
then each table as its entry count followed by the entries, row-major over the
declared scope order (last scope variable fastest).
"""

from __future__ import annotations

import numpy as np

from .factor_graph import Factor, FactorGraph


def _tokens(text: str):
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        yield from line.split()


def loads(text: str) -> FactorGraph:
    tok = _tokens(text)
    kind = next(tok)
    if kind.upper() != "MARKOV":
        raise ValueError(f"unsupported UAI network type {kind!r}")
    n_vars = int(next(tok))
    cards = tuple(int(next(tok)) for _ in range(n_vars))
    n_factors = int(next(tok))
    scopes = []
    for _ in range(n_factors):
        size = int(next(tok))
        scopes.append(tuple(int(next(tok)) for _ in range(size)))
    factors = []
    for scope in scopes:
        count = int(next(tok))
        shape = tuple(cards[v] for v in scope)
        expect = int(np.prod(shape)) if shape else 1
        if count != expect:
            raise ValueError(f"table size {count} != {expect} for scope {scope}")
        values = np.array([float(next(tok)) for _ in range(count)]).reshape(shape)
        factors.append(Factor(scope, values))
    return FactorGraph(cards, tuple(factors))


def dumps(graph: FactorGraph) -> str:
    lines = ["MARKOV", str(graph.n_vars), " ".join(map(str, graph.cards)),
             str(graph.n_factors)]
    for f in graph.factors:
        lines.append(f"{len(f.scope)} " + " ".join(map(str, f.scope)))
    lines.append("")
    for f in graph.factors:
        lines.append(str(f.values.size))
        lines.append(" ".join(repr(float(x)) for x in f.values.ravel()))
        lines.append("")
    return "\n".join(lines)


def read(path: str) -> FactorGraph:
    with open(path) as fh:
        return loads(fh.read())


def write(path: str, graph: FactorGraph) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(graph))
