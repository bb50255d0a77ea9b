"""Chronological major/minor partitioning of the edge list.

Major partitions are fixed, near-equal contiguous index ranges. For a given
time reach ``delta`` each non-final major gives up the roots whose windows
cross its right boundary; those roots are mined by a small minor partition
that extends just far enough past the boundary. Root ranges of all
partitions tile ``[0, n_edges)`` and every root's window stays inside its
partition's edge range.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .graph import TemporalGraph


class PartitionKind(Enum):
    MAJOR = "major"
    MINOR = "minor"


@dataclass(frozen=True)
class Partition:
    kind: PartitionKind
    index: int
    edge_range: tuple[int, int]
    root_range: tuple[int, int]

    @property
    def n_edges(self) -> int:
        return self.edge_range[1] - self.edge_range[0]

    @property
    def n_roots(self) -> int:
        return self.root_range[1] - self.root_range[0]


@dataclass(frozen=True)
class PartitionSet:
    majors: tuple[Partition, ...]
    minors: tuple[Partition, ...]
    delta: int

    @property
    def all(self) -> list[Partition]:
        return list(self.majors) + list(self.minors)


@dataclass(frozen=True)
class ClosureViolation:
    partition: Partition
    root: int
    reason: str

    def __str__(self):
        p = self.partition
        return f"{p.kind.value} partition {p.index} {p.edge_range}: root {self.root}: {self.reason}"


def make_major_partitions(n_edges: int, n: int) -> list[tuple[int, int]]:
    """``n`` contiguous ranges; the first ``n_edges % n`` get one extra edge."""
    if n < 1:
        raise ValueError("need at least one partition")
    base, extra = divmod(n_edges, n)
    out = []
    lo = 0
    for i in range(n):
        hi = lo + base + (1 if i < extra else 0)
        out.append((lo, hi))
        lo = hi
    return out


def _tie_start(t: np.ndarray, i: int) -> int:
    # anti-edge windows include the attach timestamp, so earlier-indexed edges
    # sharing a root's timestamp must stay reachable
    return int(np.searchsorted(t, t[i], side="left")) if i < len(t) else i


def make_minor_partitions(graph: TemporalGraph, majors: list[tuple[int, int]], delta: int) -> PartitionSet:
    t = graph.t
    n = graph.n_edges
    last_nonempty = max((i for i, (lo, hi) in enumerate(majors) if hi > lo), default=-1)
    maj, mins = [], []
    for idx, (i, hi) in enumerate(majors):
        if hi <= i:
            maj.append(Partition(PartitionKind.MAJOR, idx, (i, i), (i, i)))
            continue
        j = hi - 1
        if idx >= last_nonempty:
            maj.append(Partition(PartitionKind.MAJOR, idx, (_tie_start(t, i), hi), (i, hi)))
            continue
        tj = int(t[j])
        # k: last index in [i, j] with t_j - t_k > delta
        k = i + int(np.searchsorted(t[i:j + 1], tj - delta, side="left")) - 1
        # l: first index with t_l - t_j > delta (last edge when none)
        l = int(np.searchsorted(t, tj + delta, side="right"))
        l = min(l, n - 1)
        maj.append(Partition(PartitionKind.MAJOR, idx, (_tie_start(t, i), hi), (i, k + 1)))
        mins.append(Partition(PartitionKind.MINOR, idx, (_tie_start(t, k + 1), l + 1), (k + 1, j + 1)))
    return PartitionSet(tuple(maj), tuple(mins), delta)


def build_partitions(graph: TemporalGraph, n: int, delta: int) -> PartitionSet:
    return make_minor_partitions(graph, make_major_partitions(graph.n_edges, n), delta)


def verify_partition_closure(graph: TemporalGraph, pset: PartitionSet) -> ClosureViolation | None:
    """``None`` when root ranges tile the edge list and every root window is partition-local."""
    n = graph.n_edges
    t = graph.t
    parts = sorted((p for p in pset.all if p.n_roots > 0), key=lambda p: p.root_range)
    pos = 0
    for p in parts:
        lo, hi = p.root_range
        if lo != pos:
            root = min(lo, pos)
            reason = "root covered twice" if lo < pos else f"roots [{pos}, {lo}) not covered"
            return ClosureViolation(p, root, reason)
        pos = hi
    if pos != n:
        return ClosureViolation(parts[-1] if parts else pset.majors[0], pos, f"roots [{pos}, {n}) not covered")
    for p in parts:
        lo, hi = p.root_range
        elo, ehi = p.edge_range
        if not (elo <= lo and hi <= ehi):
            return ClosureViolation(p, lo, "root range outside edge range")
        roots = np.arange(lo, hi)
        reach = np.searchsorted(t, t[lo:hi] + pset.delta, side="right")
        bad = np.nonzero(reach > ehi)[0]
        if len(bad):
            r = int(roots[bad[0]])
            return ClosureViolation(p, r, f"window reaches edge {int(reach[bad[0]]) - 1} beyond {ehi - 1}")
        first = np.searchsorted(t, t[lo:hi], side="left")
        bad = np.nonzero(first < elo)[0]
        if len(bad):
            r = int(roots[bad[0]])
            return ClosureViolation(p, r, f"equal-timestamp edge {int(first[bad[0]])} before range start")
    return None


def describe(pset: PartitionSet, graph: TemporalGraph | None = None) -> str:
    lines = [f"delta={pset.delta}  majors={len(pset.majors)}  minors={len(pset.minors)}"]
    for p in sorted(pset.all, key=lambda p: (p.root_range, p.kind.value)):
        lines.append(f"  {p.kind.value:<5} {p.index:>3}  edges [{p.edge_range[0]}, {p.edge_range[1]})"
                     f" n={p.n_edges:<8} roots [{p.root_range[0]}, {p.root_range[1]}) n={p.n_roots}")
    if graph is not None:
        v = verify_partition_closure(graph, pset)
        lines.append("closure: ok" if v is None else f"closure: VIOLATION {v}")
    return "\n".join(lines)
