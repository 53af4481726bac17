"""Compiled inner loop for the batched sum-product sweep.

The factor graph is lowered to flat integer/float arrays: one global "edge"
per (factor, scope position), messages stored per edge as (batch, card)
blocks inside a single flat buffer.  The kernel performs one sequential sweep
over the given factor order, updating messages in place for active batch
elements and returning the per-element max message change.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def sweep_kernel(order, scope_off, edge_var, edge_card, edge_stride, edge_factor,
                 var_edge_off, var_edge_flat, tab_off, tab_size, tab_data,
                 msg_off, msg_data, active, damping, batch, max_k, max_card):
    change = np.zeros(batch)
    v2f = np.empty((max_k, batch, max_card))
    newm = np.empty((batch, max_card))
    st = np.empty(max_k, dtype=np.int64)
    for fi in range(order.shape[0]):
        f = order[fi]
        s0 = scope_off[f]
        k = scope_off[f + 1] - s0
        size = tab_size[f]
        toff = tab_off[f]
        for pos in range(k):
            e = s0 + pos
            c = edge_card[e]
            v = edge_var[e]
            for b in range(batch):
                for x in range(c):
                    v2f[pos, b, x] = 1.0
            for t in range(var_edge_off[v], var_edge_off[v + 1]):
                e2 = var_edge_flat[t]
                if edge_factor[e2] == f:
                    continue
                off = msg_off[e2]
                for b in range(batch):
                    for x in range(c):
                        v2f[pos, b, x] *= msg_data[off + b * c + x]
            for b in range(batch):
                s = 0.0
                for x in range(c):
                    s += v2f[pos, b, x]
                if s > 0.0:
                    inv = 1.0 / s
                    for x in range(c):
                        v2f[pos, b, x] *= inv
        for pos in range(k):
            e = s0 + pos
            c = edge_card[e]
            for b in range(batch):
                for x in range(c):
                    newm[b, x] = 0.0
            # accumulate table entries weighted by the other positions' messages
            for ent in range(size):
                for j in range(k):
                    st[j] = (ent // edge_stride[s0 + j]) % edge_card[s0 + j]
                xo = st[pos]
                for b in range(batch):
                    w = tab_data[toff + b * size + ent]
                    for j in range(k):
                        if j != pos:
                            w *= v2f[j, b, st[j]]
                    newm[b, xo] += w
            off = msg_off[e]
            for b in range(batch):
                s = 0.0
                for x in range(c):
                    s += newm[b, x]
                if s > 0.0:
                    inv = 1.0 / s
                    for x in range(c):
                        newm[b, x] *= inv
                else:
                    for x in range(c):
                        newm[b, x] = 1.0 / c
                if damping > 0.0:
                    for x in range(c):
                        newm[b, x] = ((1.0 - damping) * newm[b, x]
                                      + damping * msg_data[off + b * c + x])
                if active[b]:
                    d = 0.0
                    for x in range(c):
                        dd = abs(newm[b, x] - msg_data[off + b * c + x])
                        if dd > d:
                            d = dd
                    if d > change[b]:
                        change[b] = d
                    for x in range(c):
                        msg_data[off + b * c + x] = newm[b, x]
    return change
