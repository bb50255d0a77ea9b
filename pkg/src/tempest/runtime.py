"""Parallel execution of a mining plan.

Workers are threads; the compiled kernel releases the GIL while it searches,
so they run concurrently. Work is organised as executor groups (one per
major partition when partitioning, otherwise a single group). Each group owns
a queue of root sub-partitions and a deque of ready tasks (root chunks,
donated sub-trees, respawned contexts).

Two balancing triggers share the split machinery of :mod:`tempest.engine`:

* steal requests: an idle worker flags the busiest running worker of its
  group, which donates sub-trees via ``split_context`` at its next iteration
  boundary once the task has run ``steal_after_iters`` iterations;
* tail redistribution: when a group's queues are empty and a worker is idle,
  a round is raised; running tasks notice it at their next signal check,
  and those still running ``abort_timeout`` later dump, refine and fan out
  their contexts into new tasks. Rounds are serialised per group.
"""
from __future__ import annotations

import json
import logging
import os
import threading
import time
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import _layout as L
from .engine import SearchContext, fan_out, make_kernel, refine_context, split_context
from .graph import TemporalGraph
from .partition import PartitionKind, PartitionSet, build_partitions
from .plan import MiningPlan, compile_plan
from .query import MotifQuery

log = logging.getLogger(__name__)

STATS_SCHEMA = "tempest.stats/1"


def default_workers() -> int:
    env = os.environ.get("TEMPEST_WORKERS")
    if env:
        return max(1, int(env))
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1


@dataclass
class SchedulerConfig:
    workers: int = field(default_factory=default_workers)
    steal_after_iters: int = 20
    signal_check_interval: int = 1024
    abort_timeout: float = 0.1  # seconds
    root_chunk: int = 4096
    max_enumeration: int = 1000
    steal: bool = True
    redistribute: bool = True
    canonical: bool = False
    partitions: int = 1
    sub_partitions: int = 16
    max_respawn_fanout: int | None = 256
    slice_iters: int = 16384
    canonical_limit: int = 10_000_000
    backend: str | None = None
    clock: Callable[[], float] = time.monotonic

    def validate(self) -> None:
        for name in ("workers", "steal_after_iters", "signal_check_interval", "root_chunk",
                     "max_enumeration", "partitions", "sub_partitions", "slice_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.abort_timeout < 0:
            raise ValueError("abort_timeout must be >= 0")


@dataclass
class WorkerStats:
    worker: int
    group: int
    busy_time: float = 0.0
    tasks: int = 0
    iterations: int = 0
    matches: int = 0


@dataclass
class RunStats:
    matches: int = 0
    iterations: int = 0
    tasks: int = 0
    donations: int = 0
    steals: int = 0
    respawns: int = 0
    redistribution_rounds: int = 0
    refinements: int = 0
    partition_steals: int = 0
    binary_searches: int = 0
    backtrack_binary_searches: int = 0
    wall_time: float = 0.0
    workers: list[WorkerStats] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = STATS_SCHEMA
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def to_text(self) -> str:
        lines = [
            f"matches      {self.matches}",
            f"iterations   {self.iterations}",
            f"tasks        {self.tasks}",
            f"donations    {self.donations} ({self.steals} successful steal requests)",
            f"respawns     {self.respawns} over {self.redistribution_rounds} rounds",
            f"part. steals {self.partition_steals}",
            f"wall time    {self.wall_time:.3f}s",
        ]
        for w in self.workers:
            lines.append(f"  worker {w.worker:>2} (group {w.group}): busy {w.busy_time:.3f}s "
                         f"tasks {w.tasks} iters {w.iterations} matches {w.matches}")
        return "\n".join(lines)


@dataclass
class MatchOutput:
    mode: str  # "count" | "enumerate"
    total: int
    matches: list[tuple[int, ...]] | None
    truncated: bool
    stats: RunStats
    wall_time: float


# --------------------------------------------------------------------------- internals

class _View:
    __slots__ = ("graph", "kernel", "offset")

    def __init__(self, graph, kernel, offset):
        self.graph = graph
        self.kernel = kernel
        self.offset = offset


class _Task:
    __slots__ = ("view", "ctx")

    def __init__(self, view: _View, ctx: SearchContext):
        self.view = view
        self.ctx = ctx


class _Group:
    def __init__(self, gid: int):
        self.id = gid
        self.subparts: deque[tuple[_View, int, int]] = deque()
        self.ready: deque[_Task] = deque()
        self.workers: list[_Worker] = []
        self.round_active = False
        self.round_members: set[int] = set()

    def outstanding(self) -> int:
        return sum(hi - lo for _, lo, hi in self.subparts)


class _Worker:
    def __init__(self, wid: int, group: _Group):
        self.id = wid
        self.group = group
        self.ctrl = np.zeros(2, dtype=np.int64)
        self.task: _Task | None = None
        self.requests = 0
        self.waiting_on: _Worker | None = None
        self.iters_since_donation = 0
        self.count = 0
        self.matches: list[tuple[int, ...]] = []
        self.truncated = False
        self.stats = WorkerStats(wid, group.id)
        self.bsearch = 0
        self.bsearch_bt = 0


class _Scheduler:
    def __init__(self, groups: list[_Group], plan: MiningPlan, config: SchedulerConfig,
                 collect: bool, limit: int):
        self.groups = groups
        self.plan = plan
        self.cfg = config
        self.collect = collect
        self.limit = limit
        self.cond = threading.Condition()
        self.running = 0
        self.stats = RunStats()
        self.error: BaseException | None = None
        self.workers = [w for g in groups for w in g.workers]

    # ------------------------------------------------------------------ queue side

    def _expand(self, g: _Group, sub: tuple[_View, int, int]) -> None:
        view, lo, hi = sub
        cfg = self.cfg
        for c in range(lo, hi, cfg.root_chunk):
            ctx = SearchContext.for_roots(view.kernel, c, min(hi, c + cfg.root_chunk),
                                          cfg.signal_check_interval, cfg.steal_after_iters)
            g.ready.append(_Task(view, ctx))

    def _idle_everywhere(self) -> bool:
        return self.running == 0 and not any(g.ready or g.subparts for g in self.groups)

    def _next_task(self, w: _Worker) -> _Task | None:
        g = w.group
        with self.cond:
            while True:
                if self.error is not None:
                    return None
                if g.ready:
                    task = g.ready.popleft()
                    w.task = task
                    w.waiting_on = None
                    w.ctrl[:] = 0
                    w.requests = 0
                    w.iters_since_donation = 0
                    self.running += 1
                    return task
                if g.subparts:
                    self._expand(g, g.subparts.popleft())
                    continue
                donors = [o for o in self.groups if o is not g and o.subparts]
                if donors:
                    victim = max(donors, key=_Group.outstanding)
                    self._expand(g, victim.subparts.pop())
                    self.stats.partition_steals += 1
                    continue
                if self._idle_everywhere():
                    self.cond.notify_all()
                    return None
                if self.cfg.steal:
                    self._request_steal(w)
                if self.cfg.redistribute:
                    self._maybe_start_round(g)
                self.cond.wait(0.002)

    def _request_steal(self, w: _Worker) -> None:
        prev = w.waiting_on
        if prev is not None and prev.task is not None and prev.requests > 0:
            return
        busy = [o for o in w.group.workers if o is not w and o.task is not None]
        if not busy:
            return
        victim = max(busy, key=lambda o: o.iters_since_donation)
        victim.requests += 1
        victim.ctrl[L.CTRL_STEAL] = 1
        w.waiting_on = victim

    def _maybe_start_round(self, g: _Group) -> None:
        if g.round_active or g.ready or g.subparts:
            return
        members = [o for o in g.workers if o.task is not None]
        if not members:
            return
        g.round_active = True
        g.round_members = {o.id for o in members}
        for o in members:
            o.ctrl[L.CTRL_ABORT] = 1
        self.stats.redistribution_rounds += 1

    def _leave_round(self, w: _Worker) -> None:
        g = w.group
        if w.id in g.round_members:
            g.round_members.discard(w.id)
            if not g.round_members:
                g.round_active = False

    # ------------------------------------------------------------------ worker side

    def _harvest(self, w: _Worker, task: _Task, out, last_iters: int) -> int:
        buf = task.ctx.buf
        emitted = int(buf[L.EMITTED])
        w.count += emitted
        w.stats.matches += emitted
        w.bsearch += int(buf[L.BSEARCH])
        w.bsearch_bt += int(buf[L.BSEARCH_BT])
        buf[L.EMITTED] = buf[L.BSEARCH] = buf[L.BSEARCH_BT] = 0
        it = int(buf[L.ITERS])
        w.stats.iterations += it - last_iters
        w.iters_since_donation += it - last_iters
        fill = int(buf[L.OUT_FILL])
        if fill:
            cap = self.cfg.canonical_limit if self.cfg.canonical else self.limit
            room = cap - len(w.matches)
            rows = out[:min(fill, max(room, 0))]
            if len(rows):
                off = task.view.offset
                w.matches.extend(tuple(r) for r in (rows + off).tolist())
            if fill > room:
                w.truncated = True
            buf[L.OUT_FILL] = 0
        return it

    def _donate(self, w: _Worker, task: _Task) -> None:
        cfg = self.cfg
        with self.cond:
            n = w.requests
            w.requests = 0
            w.ctrl[L.CTRL_STEAL] = 0
            ctx = task.ctx
            ctx.buf[L.STEAL_MIN] = ctx.iter_count + cfg.steal_after_iters
            if n <= 0:
                return
            _, donations = split_context(ctx, self.plan, n, cfg.steal_after_iters)
            for d in donations:
                d.buf[L.NEXT_SIG] = 0
                w.group.ready.appendleft(_Task(task.view, d))
            if donations:
                self.stats.donations += len(donations)
                self.stats.steals += 1
                w.iters_since_donation = 0
            self.cond.notify_all()

    def _dump(self, w: _Worker, task: _Task) -> bool:
        cfg = self.cfg
        refined = refine_context(task.ctx, task.view.kernel)
        parts = fan_out(refined, task.view.kernel, cfg.max_respawn_fanout, cfg.steal_after_iters)
        with self.cond:
            self.stats.refinements += 1
            if len(parts) == 1:
                task.ctx = refined
                return False
            for p in parts:
                p.buf[L.NEXT_SIG] = 0
                w.group.ready.append(_Task(task.view, p))
            self.stats.respawns += len(parts)
            self.cond.notify_all()
        return True

    def _execute(self, w: _Worker, task: _Task) -> None:
        cfg = self.cfg
        kernel = task.view.kernel
        out = np.empty((4096, self.plan.n_real), dtype=np.int64) if self.collect else None
        deadline = None
        last = task.ctx.iter_count
        w.stats.tasks += 1
        try:
            while True:
                t0 = time.perf_counter()
                status = kernel.run(task.ctx.buf, w.ctrl, cfg.slice_iters, cfg.signal_check_interval, out)
                w.stats.busy_time += time.perf_counter() - t0
                last = self._harvest(w, task, out, last)
                if status == L.DONE:
                    break
                if status == L.STEAL:
                    self._donate(w, task)
                elif status == L.SIGNAL and deadline is None:
                    deadline = cfg.clock() + cfg.abort_timeout
                if deadline is not None and cfg.clock() >= deadline:
                    if self._dump(w, task):
                        break
                    deadline = None
                    with self.cond:
                        self._leave_round(w)
        finally:
            with self.cond:
                w.task = None
                w.ctrl[:] = 0
                w.requests = 0
                self.running -= 1
                self._leave_round(w)
                self.cond.notify_all()

    def _main(self, w: _Worker) -> None:
        try:
            while True:
                task = self._next_task(w)
                if task is None:
                    return
                self._execute(w, task)
        except BaseException as exc:  # surface worker failures to the caller
            with self.cond:
                if self.error is None:
                    self.error = exc
                self.cond.notify_all()

    def run(self) -> RunStats:
        t0 = time.perf_counter()
        if len(self.workers) == 1:
            self._main(self.workers[0])
        else:
            threads = [threading.Thread(target=self._main, args=(w,), name=f"tempest-w{w.id}", daemon=True)
                       for w in self.workers]
            for th in threads:
                th.start()
            for th in threads:
                th.join()
        if self.error is not None:
            raise self.error
        s = self.stats
        s.wall_time = time.perf_counter() - t0
        s.matches = sum(w.count for w in self.workers)
        s.iterations = sum(w.stats.iterations for w in self.workers)
        s.tasks = sum(w.stats.tasks for w in self.workers)
        s.binary_searches = sum(w.bsearch for w in self.workers)
        s.backtrack_binary_searches = sum(w.bsearch_bt for w in self.workers)
        s.workers = [w.stats for w in self.workers]
        return s


# --------------------------------------------------------------------------- entry points

def _make_groups(n_groups: int, n_workers: int) -> list[_Group]:
    groups = [_Group(i) for i in range(n_groups)]
    for wid in range(max(n_workers, n_groups)):
        g = groups[wid % n_groups]
        g.workers.append(_Worker(wid, g))
    return groups


def _split_roots(lo: int, hi: int, k: int) -> list[tuple[int, int]]:
    n = hi - lo
    if n <= 0:
        return []
    k = max(1, min(k, n))
    cuts = [lo + (i * n) // k for i in range(k + 1)]
    return [(cuts[i], cuts[i + 1]) for i in range(k) if cuts[i + 1] > cuts[i]]


def _finish(sched: _Scheduler, collect: bool, limit: int, t0: float) -> MatchOutput:
    stats = sched.run()
    total = stats.matches
    matches = None
    truncated = False
    if collect:
        merged = [m for w in sched.workers for m in w.matches]
        truncated = any(w.truncated for w in sched.workers) or len(merged) > limit
        if sched.cfg.canonical:
            merged.sort()
        matches = merged[:limit]
        truncated = truncated or total > len(matches)
    wall = time.perf_counter() - t0
    return MatchOutput("enumerate" if collect else "count", total, matches, truncated, stats, wall)


def schedule_partitions(graph: TemporalGraph, plan: MiningPlan, pset: PartitionSet, n_groups: int,
                        config: SchedulerConfig, collect: bool = False,
                        limit: int | None = None) -> MatchOutput:
    """Mine every partition with ``n_groups`` executor groups.

    Majors are cut into ``sub_partitions`` root sub-partitions queued on group
    ``index % n_groups``; each minor is one sub-partition on the same group.
    Idle groups steal whole pending sub-partitions from the group with the
    most outstanding roots.
    """
    config.validate()
    t0 = time.perf_counter()
    limit = limit or config.max_enumeration
    groups = _make_groups(n_groups, config.workers)
    for p in pset.all:
        if p.n_roots == 0:
            continue
        lo, hi = p.edge_range
        if (lo, hi) == (0, graph.n_edges):
            sub = graph
        else:
            sub = graph.slice(lo, hi)
        view = _View(sub, make_kernel(sub, plan, config.backend), lo)
        g = groups[p.index % n_groups]
        r0, r1 = p.root_range[0] - lo, p.root_range[1] - lo
        k = config.sub_partitions if p.kind is PartitionKind.MAJOR else 1
        for a, b in _split_roots(r0, r1, k):
            g.subparts.append((view, a, b))
    sched = _Scheduler(groups, plan, config, collect, limit)
    return _finish(sched, collect, limit, t0)


def run_query(graph: TemporalGraph, query: MotifQuery | MiningPlan, config: SchedulerConfig | None = None,
              enumerate_limit: int | None = None) -> MatchOutput:
    """Count or enumerate every match of ``query`` in ``graph``."""
    config = config or SchedulerConfig()
    config.validate()
    if isinstance(query, MiningPlan):
        plan = query
        reach = plan.cg_delta + max((lv.window or 0 for lv in plan.levels), default=0)
    else:
        plan = compile_plan(query)
        reach = query.closure_delta()
    collect = plan.enumerate or enumerate_limit is not None
    limit = enumerate_limit or plan.max_matches or config.max_enumeration
    if config.partitions > 1:
        pset = build_partitions(graph, config.partitions, reach)
        return schedule_partitions(graph, plan, pset, config.partitions, config, collect, limit)
    t0 = time.perf_counter()
    groups = _make_groups(1, config.workers)
    if graph.n_edges:
        view = _View(graph, make_kernel(graph, plan, config.backend), 0)
        for a, b in _split_roots(0, graph.n_edges, config.sub_partitions):
            groups[0].subparts.append((view, a, b))
    sched = _Scheduler(groups, plan, config, collect, limit)
    return _finish(sched, collect, limit, t0)


def count_partition(graph: TemporalGraph, plan: MiningPlan, part, backend: str | None = None) -> int:
    """Single-threaded count of the matches rooted in one partition, using only its edges."""
    lo, hi = part.edge_range
    sub = graph.slice(lo, hi)
    kernel = make_kernel(sub, plan, backend)
    if part.n_roots == 0:
        return 0
    ctx = SearchContext.for_roots(kernel, part.root_range[0] - lo, part.root_range[1] - lo)
    ctrl = np.zeros(2, dtype=np.int64)
    total = 0
    while True:
        status = kernel.run(ctx.buf, ctrl, 1 << 62, 1 << 62, None)
        total += int(ctx.buf[L.EMITTED])
        ctx.buf[L.EMITTED] = 0
        if status == L.DONE:
            return total
