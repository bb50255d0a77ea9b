"""Brute-force reference miner.

Enumerates every increasing tuple of edge indices whose time span fits in
``cg_delta`` and checks each motif condition on the complete tuple. It only
touches the graph's raw edge arrays, never the adjacency indices, the plan or
the search kernels, so it can serve as an independent ground truth.

Tuples sharing a root are materialised in blocks and checked with numpy
column comparisons; anti-edges are then checked per surviving tuple by a
scan over the whole edge list.
"""
from __future__ import annotations

from itertools import chain, combinations, islice

import numpy as np

from .graph import TemporalGraph
from .query import MotifQuery

DEFAULT_GUARD = 2000
_BLOCK = 1 << 16


class OracleTooLarge(RuntimeError):
    pass


def _block_ok(query: MotifQuery, combo: np.ndarray, src, dst, t, vlab, elab) -> np.ndarray:
    """Boolean mask over the rows of ``combo`` (tuples of edge indices) passing every non-anti check."""
    real = query.real_edges
    ends: dict[int, list[np.ndarray]] = {}
    for j, me in enumerate(real):
        ends.setdefault(me.u, []).append(src[combo[:, j]])
        ends.setdefault(me.v, []).append(dst[combo[:, j]])
    ok = np.ones(len(combo), dtype=bool)
    rep = {}
    for mv, cols in ends.items():
        for c in cols[1:]:
            ok &= c == cols[0]
        rep[mv] = cols[0]
    verts = sorted(rep)
    for i, a in enumerate(verts):
        for b in verts[i + 1:]:
            ok &= rep[a] != rep[b]
    tt = t[combo]
    ok &= tt[:, -1] - tt[:, 0] <= query.cg_delta
    for i, bound in query.fg_delta.items():
        ok &= tt[:, i + 1] - tt[:, i] <= bound
    for mv, lab in query.vertex_labels.items():
        ok &= (vlab[rep[mv]] if vlab is not None else 0) == lab
    for j, me in enumerate(real):
        if me.label is not None:
            ok &= (elab[combo[:, j]] if elab is not None else 0) == me.label
    return ok


def _anti_ok(query: MotifQuery, tup, src, dst, t) -> bool:
    real = query.real_edges
    mapping = {}
    for me, e in zip(real, tup):
        mapping[me.u] = src[e]
        mapping[me.v] = dst[e]
    for a in query.anti_edges:
        x, y = mapping[a.u], mapping[a.v]
        ta = t[tup[a.attach]]
        for f in range(len(t)):
            if src[f] == x and dst[f] == y and ta <= t[f] <= ta + a.window:
                return False
    return True


def brute_force_mine(graph: TemporalGraph, query: MotifQuery, force: bool = False,
                     guard: int = DEFAULT_GUARD) -> list[tuple[int, ...]]:
    """All matches as index tuples, sorted lexicographically."""
    n = graph.n_edges
    if n > guard and not force:
        raise OracleTooLarge(f"graph has {n} edges; oracle guard is {guard} (use force)")
    k = len(query.real_edges)
    src, dst, t = graph.src.astype(np.int64), graph.dst.astype(np.int64), graph.t
    vlab, elab = graph.vertex_labels, graph.edge_labels
    srcl, dstl, tl = src.tolist(), dst.tolist(), t.tolist()
    found: list[tuple[int, ...]] = []
    # last edge within the span of each root
    last = np.searchsorted(t, t + query.cg_delta, side="right")
    for root in range(n):
        tail = combinations(range(root + 1, int(last[root])), k - 1)
        while True:
            flat = np.fromiter(chain.from_iterable(islice(tail, _BLOCK)), dtype=np.int64)
            if k > 1 and flat.size == 0:
                break
            block = np.empty((max(1, flat.size // max(1, k - 1)), k), dtype=np.int64)
            block[:, 0] = root
            if k > 1:
                block[:, 1:] = flat.reshape(-1, k - 1)
            for row in block[_block_ok(query, block, src, dst, t, vlab, elab)].tolist():
                if not query.anti_edges or _anti_ok(query, row, srcl, dstl, tl):
                    found.append(tuple(row))
            if k == 1 or flat.size < _BLOCK * (k - 1):
                break
    found.sort()
    return found


def brute_force_count(graph: TemporalGraph, query: MotifQuery, **kw) -> int:
    return len(brute_force_mine(graph, query, **kw))
