"""Single search-tree execution, context split/refine, and match verification.

The hot loop lives in a kernel object (compiled ``_ckernel`` when available,
``_pykernel`` otherwise). Everything here works on :class:`SearchContext`, a
thin view over the kernel's flat ``int64`` context buffer.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, fields
from typing import Callable, Iterable

import numpy as np

from . import _layout as L
from . import _pykernel
from .graph import TemporalGraph
from .plan import Kind, MiningPlan, compile_plan
from .query import MotifQuery

log = logging.getLogger(__name__)

try:
    from . import _ckernel
except ImportError:  # pragma: no cover - exercised when the extension is not built
    _ckernel = None

BACKENDS = ("cython", "python")


def available_backends() -> list[str]:
    return [b for b in BACKENDS if b == "python" or _ckernel is not None]


def default_backend() -> str:
    env = os.environ.get("TEMPEST_BACKEND")
    if env:
        return env
    return "cython" if _ckernel is not None else "python"


def make_kernel(graph: TemporalGraph, plan: MiningPlan, backend: str | None = None):
    backend = backend or default_backend()
    if backend == "cython":
        if _ckernel is None:
            raise RuntimeError("compiled kernel not built; run `pip install -e . --no-build-isolation`")
        return _ckernel.Kernel(graph, plan)
    if backend == "python":
        return _pykernel.Kernel(graph, plan)
    raise ValueError(f"unknown backend {backend!r}")


@dataclass
class MatchStats:
    iterations: int = 0
    emitted: int = 0
    donations: int = 0
    refinements: int = 0
    binary_searches: int = 0
    backtrack_binary_searches: int = 0

    def merge(self, other: "MatchStats") -> "MatchStats":
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))
        return self


class SearchContext:
    """One task's search state over a shared flat buffer layout."""

    __slots__ = ("buf", "n_slots", "n_levels", "_m", "_b", "_e", "_s")

    def __init__(self, buf: np.ndarray, n_slots: int, n_levels: int):
        self.buf = buf
        self.n_slots = n_slots
        self.n_levels = n_levels
        self._m, self._b, self._e, self._s, _ = L.offsets(n_slots, n_levels)

    @classmethod
    def for_roots(cls, kernel, lo: int, hi: int, signal_interval: int = 1024,
                  steal_after: int = 20) -> "SearchContext":
        buf = kernel.new_context(lo, hi, signal_interval, steal_after)
        return cls(buf, kernel.n_slots, kernel.n_levels)

    def copy(self) -> "SearchContext":
        return SearchContext(self.buf.copy(), self.n_slots, self.n_levels)

    @property
    def level(self) -> int:
        return int(self.buf[L.LEVEL])

    @level.setter
    def level(self, v: int):
        self.buf[L.LEVEL] = v

    @property
    def t_limit(self) -> int:
        return int(self.buf[L.T_LIMIT])

    @property
    def iter_count(self) -> int:
        return int(self.buf[L.ITERS])

    @property
    def mapping(self) -> np.ndarray:
        return self.buf[self._m:self._m + self.n_slots]

    @property
    def beg(self) -> np.ndarray:
        return self.buf[self._b:self._b + self.n_levels]

    @property
    def end(self) -> np.ndarray:
        return self.buf[self._e:self._e + self.n_levels]

    @property
    def medge(self) -> np.ndarray:
        return self.buf[self._s:self._s + self.n_levels]

    def range(self, level: int) -> tuple[int, int]:
        return int(self.beg[level]), int(self.end[level])

    def remaining(self, level: int) -> int:
        b, e = self.range(level)
        return max(0, e - b)

    def estack(self, plan: MiningPlan) -> list[int]:
        """Matched graph edges of the completed real levels."""
        return [int(self.medge[lv]) for lv in plan.real_levels if lv < self.level]

    def reset_counters(self):
        for k in (L.ITERS, L.EMITTED, L.BSEARCH, L.BSEARCH_BT, L.OUT_FILL):
            self.buf[k] = 0

    def __repr__(self):
        rngs = ", ".join(f"{i}:[{b},{e})" for i, (b, e) in
                         enumerate(zip(self.beg[:self.level + 1], self.end[:self.level + 1])))
        return f"SearchContext(level={self.level}, t_limit={self.t_limit}, ranges={{{rngs}}})"


# --------------------------------------------------------------------------- stepping API

def find_next_match(ctx: SearchContext, kernel) -> int | None:
    """Advance the current level to its next acceptable candidate; ``None`` when exhausted."""
    e = kernel.find_next_match(ctx.buf)
    return None if e < 0 else int(e)


def descend(ctx: SearchContext, kernel, matched_edge: int, out=None) -> int:
    """Bookkeep ``matched_edge``; returns ``DESCENDED``, ``EMIT`` or ``PRUNED`` (anti-edge hit)."""
    return kernel.descend(ctx.buf, matched_edge, out)


def backtrack(ctx: SearchContext, kernel) -> bool:
    """Return to the previous real level's cached range; True when the tree is done."""
    return bool(kernel.backtrack(ctx.buf))


def check_anti(ctx: SearchContext, kernel, level: int) -> bool:
    """True when the anti-edge at ``level`` is violated under the current mapping."""
    return bool(kernel.check_anti(ctx.buf, level))


def run_context(ctx: SearchContext, kernel, sink: Callable[[tuple], None] | None = None,
                batch: int = 4096) -> MatchStats:
    """Run ``ctx`` to completion on the calling thread."""
    ctrl = np.zeros(2, dtype=np.int64)
    out = np.empty((batch, kernel.plan.n_real), dtype=np.int64) if sink is not None else None
    stats = MatchStats()
    start_iters = ctx.iter_count
    while True:
        status = kernel.run(ctx.buf, ctrl, 1 << 62, 1 << 62, out)
        _harvest(ctx, stats, out, sink)
        if status == L.DONE:
            break
    stats.iterations = ctx.iter_count - start_iters
    return stats


def _harvest(ctx: SearchContext, stats: MatchStats, out, sink) -> None:
    buf = ctx.buf
    stats.emitted += int(buf[L.EMITTED])
    stats.binary_searches += int(buf[L.BSEARCH])
    stats.backtrack_binary_searches += int(buf[L.BSEARCH_BT])
    buf[L.EMITTED] = buf[L.BSEARCH] = buf[L.BSEARCH_BT] = 0
    fill = int(buf[L.OUT_FILL])
    if out is not None and fill:
        if sink is not None:
            for row in out[:fill].tolist():
                sink(tuple(row))
        buf[L.OUT_FILL] = 0


def mine_root(graph: TemporalGraph, plan: MiningPlan, root_edge: int,
              sink: Callable[[tuple], None] | None = None, kernel=None) -> MatchStats:
    """Expand the single search tree rooted at ``root_edge``."""
    kernel = kernel or make_kernel(graph, plan)
    ctx = SearchContext.for_roots(kernel, root_edge, root_edge + 1)
    return run_context(ctx, kernel, sink)


def mine_all(graph: TemporalGraph, query_or_plan, backend: str | None = None) -> list[tuple[int, ...]]:
    """Single-threaded enumeration over every root, sorted. Convenience for tests and tools."""
    plan = query_or_plan if isinstance(query_or_plan, MiningPlan) else compile_plan(query_or_plan)
    kernel = make_kernel(graph, plan, backend)
    found: list[tuple[int, ...]] = []
    ctx = SearchContext.for_roots(kernel, 0, graph.n_edges)
    run_context(ctx, kernel, found.append)
    found.sort()
    return found


# --------------------------------------------------------------------------- split / refine

def _real_levels_upto(plan: MiningPlan, level: int) -> list[int]:
    return [lv for lv in plan.real_levels if lv <= level]


def _donate(ctx: SearchContext, plan: MiningPlan, level: int, lo: int, hi: int,
            steal_after: int) -> SearchContext:
    d = ctx.copy()
    d.reset_counters()
    d.buf[L.STEAL_MIN] = steal_after
    for lv in _real_levels_upto(plan, level - 1):
        d.beg[lv] = d.end[lv]
    d.beg[level] = lo
    d.end[level] = hi
    d.level = level
    return d


def split_context(ctx: SearchContext, plan: MiningPlan, n: int = 1,
                  steal_after: int = 20) -> tuple[SearchContext, list[SearchContext]]:
    """Donate up to ``n`` single-candidate sub-trees out of ``ctx``.

    Each donation takes the first remaining candidate of the deepest level that
    still has at least two; ``ctx`` keeps the rest. Anti levels hold no
    candidates and never donate.
    """
    donations = []
    levels = _real_levels_upto(plan, ctx.level)
    for _ in range(n):
        pick = next((lv for lv in reversed(levels) if ctx.remaining(lv) >= 2), None)
        if pick is None:
            break
        b = int(ctx.beg[pick])
        donations.append(_donate(ctx, plan, pick, b, b + 1, steal_after))
        ctx.beg[pick] = b + 1
    return ctx, donations


def refine_context(ctx: SearchContext, kernel) -> SearchContext:
    """Tighten every non-root range's end to its level's time cap; idempotent.

    Level 0 holds root edges, which are not bounded by the current root's window.
    """
    plan = kernel.plan
    out = ctx.copy()
    t = kernel.graph.t
    adj = kernel.graph.adj
    for lv in _real_levels_upto(plan, out.level):
        if lv == 0:
            continue
        cap = kernel.cap(out.buf, lv)
        lo, hi = out.range(lv)
        a, b = lo, hi
        while a < b:
            mid = (a + b) // 2
            if t[adj[mid]] <= cap:
                a = mid + 1
            else:
                b = mid
        out.end[lv] = max(lo, a)
    return out


def fan_out(ctx: SearchContext, kernel, max_tasks: int | None = None,
            steal_after: int = 20) -> list[SearchContext]:
    """Split a refined context along its longest remaining candidate list.

    The first candidate (and everything shallower) stays with ``ctx``; every
    other candidate of the longest list becomes its own task. With
    ``max_tasks`` the tail is grouped into contiguous slices instead. Unstarted
    roots of a deeper context are handed back as one separate root task.
    """
    plan = kernel.plan
    tasks = [ctx]
    lvls = _real_levels_upto(plan, ctx.level)
    if ctx.level > 0 and ctx.remaining(0) > 0:
        b, e = ctx.range(0)
        base = 2 * kernel.graph.n_edges
        tasks.append(SearchContext.for_roots(kernel, b - base, e - base, int(ctx.buf[L.NEXT_SIG]) or 1024,
                                             steal_after))
        ctx.beg[0] = ctx.end[0]
    candidates = [lv for lv in lvls if ctx.level == 0 or lv > 0]
    if not candidates:
        return tasks
    longest = max(candidates, key=lambda lv: (ctx.remaining(lv), -lv))
    n = ctx.remaining(longest)
    if n < 2:
        return tasks
    k = n if max_tasks is None else max(2, min(n, max_tasks))
    lo, hi = ctx.range(longest)
    cuts = [lo + (i * n) // k for i in range(k + 1)]
    for i in range(1, k):
        tasks.append(_donate(ctx, plan, longest, cuts[i], cuts[i + 1], steal_after))
    ctx.end[longest] = cuts[1]
    return tasks


# --------------------------------------------------------------------------- verification

def verify_match(graph: TemporalGraph, query: MotifQuery, match: Iterable[int]) -> str | None:
    """Re-check a match against every constraint; ``None`` if valid, else the first violated one.

    Names: ``arity``, ``structure``, ``temporal_order``, ``cg_delta``, ``fg_delta``,
    ``vertex_label``, ``edge_label``, ``anti_edge``.
    """
    match = [int(e) for e in match]
    real = query.real_edges
    if len(match) != len(real) or any(not 0 <= e < graph.n_edges for e in match):
        return "arity"
    mapping: dict[int, int] = {}
    for me, e in zip(real, match):
        s, d = int(graph.src[e]), int(graph.dst[e])
        for mv, gv in ((me.u, s), (me.v, d)):
            if mapping.setdefault(mv, gv) != gv:
                return "structure"
    if len(set(mapping.values())) != len(mapping):
        return "structure"
    keys = [(int(graph.t[e]), e) for e in match]
    if any(a >= b for a, b in zip(keys, keys[1:])):
        return "temporal_order"
    ts = [k[0] for k in keys]
    if ts[-1] - ts[0] > query.cg_delta:
        return "cg_delta"
    for i, bound in sorted(query.fg_delta.items()):
        if ts[i + 1] - ts[i] > bound:
            return "fg_delta"
    for mv, lab in query.vertex_labels.items():
        if graph.vertex_label(mapping[mv]) != lab:
            return "vertex_label"
    for me, e in zip(real, match):
        if me.label is not None and graph.edge_label(e) != me.label:
            return "edge_label"
    for a in query.anti_edges:
        x, y = mapping[a.u], mapping[a.v]
        ta = ts[a.attach]
        out = graph.out_edges(x)
        hit = (graph.dst[out] == y) & (graph.t[out] >= ta) & (graph.t[out] <= ta + a.window)
        if hit.any():
            return "anti_edge"
    return None
