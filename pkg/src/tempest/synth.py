"""Synthetic temporal graphs for tests and benchmarks."""
from __future__ import annotations

import numpy as np

from .graph import TemporalGraph


def random_graph(rng: np.random.Generator, n_vertices: int, n_edges: int, t_max: int,
                 duplicate_rate: float = 0.2, n_edge_labels: int = 0,
                 n_vertex_labels: int = 0) -> TemporalGraph:
    """Uniform random edges without self-loops; a share of timestamps is copied to force ties."""
    src = rng.integers(0, n_vertices, n_edges)
    dst = (src + rng.integers(1, max(n_vertices, 2), n_edges)) % max(n_vertices, 2)
    t = rng.integers(0, t_max + 1, n_edges)
    dup = rng.random(n_edges) < duplicate_rate
    if n_edges and dup.any():
        t[dup] = t[rng.integers(0, n_edges, int(dup.sum()))]
    order = np.argsort(t, kind="stable")
    el = rng.integers(0, n_edge_labels, n_edges)[order].astype(np.int32) if n_edge_labels else None
    vl = rng.integers(0, n_vertex_labels, n_vertices).astype(np.int32) if n_vertex_labels else None
    return TemporalGraph(src[order].astype(np.int32), dst[order].astype(np.int32), t[order].astype(np.int64),
                         int(n_vertices), edge_labels=el, vertex_labels=vl)


def hot_vertex_graph(rng: np.random.Generator, n_edges: int = 200_000, n_vertices: int = 20_000,
                     hot_share: float = 0.5, t_max: int | None = None) -> TemporalGraph:
    """One vertex (id 0) is an endpoint of ``hot_share`` of the edges; the rest are uniform."""
    t_max = t_max if t_max is not None else n_edges
    src = rng.integers(1, n_vertices, n_edges)
    dst = rng.integers(1, n_vertices, n_edges)
    same = src == dst
    dst[same] = (dst[same] % (n_vertices - 1)) + 1
    dst[same & (dst == src)] = (src[same & (dst == src)] % (n_vertices - 1)) + 1
    hot = rng.random(n_edges) < hot_share
    side = rng.random(n_edges) < 0.5
    src[hot & side] = 0
    dst[hot & ~side] = 0
    t = np.sort(rng.integers(0, t_max, n_edges))
    return TemporalGraph(src.astype(np.int32), dst.astype(np.int32), t.astype(np.int64), int(n_vertices))
