import itertools
import json
import random

import numpy as np
import pytest

from motifs import PATH2_ANTI_Q, SHAPES, TRIANGLE_Q, g1, g2, random_generalized_query, random_small_graph, shape_query
from tempest.engine import mine_all
from tempest.graph import TemporalGraph
from tempest.oracle import brute_force_mine
from tempest.partition import build_partitions
from tempest.plan import compile_plan
from tempest.query import parse_query
from tempest.runtime import STATS_SCHEMA, SchedulerConfig, default_workers, run_query, schedule_partitions
from tempest.synth import hot_vertex_graph


def _star_graph(n_leaves=400, hub=0):
    """Every edge leaves one hub inside a short span: a single root's tree holds almost all work."""
    edges = [(hub, 1 + (i % n_leaves), i) for i in range(n_leaves)]
    return TemporalGraph.from_edges(edges)


STAR3 = shape_query([(0, 1), (0, 2), (0, 3)], 10_000)


@pytest.mark.parametrize("workers", [1, 2, 8])
def test_g1_counts(workers, backend):
    out = run_query(g1(), parse_query(TRIANGLE_Q), SchedulerConfig(workers=workers, backend=backend))
    assert out.mode == "count" and out.total == 2 and out.matches is None


def test_g2_anti_count(backend):
    assert run_query(g2(), parse_query(PATH2_ANTI_Q), SchedulerConfig(workers=4, backend=backend)).total == 2


def test_counts_exact_across_settings():
    rng = random.Random(1)
    for _ in range(8):
        g = random_small_graph(rng, 20, 300)
        q = random_generalized_query(rng, rng.choice(list(SHAPES)), 300, labels=False)
        ref = len(mine_all(g, q))
        for w, chunk, steal, redis, parts in itertools.product((1, 3), (1, 64), (True, False), (True, False),
                                                               (1, 3)):
            cfg = SchedulerConfig(workers=w, root_chunk=chunk, steal=steal, redistribute=redis,
                                  partitions=parts, steal_after_iters=1, signal_check_interval=4,
                                  abort_timeout=0.0)
            assert run_query(g, q, cfg).total == ref


def test_enumerate_multiset_equals_oracle():
    rng = random.Random(2)
    for _ in range(10):
        g = random_small_graph(rng, 15, 150)
        q = random_generalized_query(rng, rng.choice(list(SHAPES)), 200, labels=False)
        cfg = SchedulerConfig(workers=4, root_chunk=3, steal_after_iters=1, canonical=True, partitions=2)
        out = run_query(g, q, cfg, enumerate_limit=10**6)
        assert out.matches == brute_force_mine(g, q)
        assert not out.truncated


def test_enumerate_truncates():
    g = _star_graph(30)
    out = run_query(g, STAR3, SchedulerConfig(workers=2, canonical=True), enumerate_limit=5)
    full = mine_all(g, STAR3)
    assert out.total == len(full)
    assert out.matches == full[:5] and out.truncated
    out = run_query(g, STAR3, SchedulerConfig(workers=2), enumerate_limit=5)
    assert len(out.matches) == 5 and set(out.matches) <= set(full)


def test_query_enumerate_flag_uses_max_matches():
    q = parse_query(TRIANGLE_Q + "runtime_params:\n  enumerate = true\n  max_matches = 1\n")
    out = run_query(g1(), q, SchedulerConfig(workers=1, canonical=True))
    assert out.mode == "enumerate" and out.matches == [(0, 1, 2)] and out.truncated


def test_giant_root_task_donates(backend):
    g = _star_graph(120)
    cfg = SchedulerConfig(workers=8, root_chunk=1 << 20, sub_partitions=1, redistribute=False,
                          backend=backend, slice_iters=256)
    out = run_query(g, STAR3, cfg)
    assert out.total == len(mine_all(g, STAR3))
    assert out.stats.donations >= 7


def test_small_tasks_do_not_donate():
    g = _star_graph(10)
    q = shape_query([(0, 1)], 5)
    out = run_query(g, q, SchedulerConfig(workers=4, root_chunk=1, steal_after_iters=1000, redistribute=False))
    assert out.stats.donations == 0 and out.total == 10


def test_single_worker_never_steals():
    g = _star_graph(100)
    out = run_query(g, STAR3, SchedulerConfig(workers=1))
    assert out.stats.donations == 0 and out.stats.respawns == 0
    assert out.total == len(mine_all(g, STAR3))


class _Ticker:
    """Virtual clock advancing one second per read."""

    def __init__(self):
        self.now = 0.0

    def __call__(self):
        self.now += 1.0
        return self.now


def test_redistribution_respawns_with_virtual_clock(backend):
    g = _star_graph(120)
    cfg = SchedulerConfig(workers=4, root_chunk=1 << 20, sub_partitions=1, steal=False, backend=backend,
                          signal_check_interval=64, abort_timeout=0.5, clock=_Ticker(), slice_iters=128)
    out = run_query(g, STAR3, cfg)
    assert out.total == len(mine_all(g, STAR3))
    assert out.stats.redistribution_rounds >= 1
    assert out.stats.respawns >= 1


def test_fast_tail_has_no_respawns():
    g = g1()
    cfg = SchedulerConfig(workers=4, abort_timeout=3600.0)
    out = run_query(g, parse_query(TRIANGLE_Q), cfg)
    assert out.stats.respawns == 0 and out.total == 2


def test_schedule_partitions_single_group_matches_whole():
    g = hot_vertex_graph(np.random.default_rng(0), 3000, 200)
    q = shape_query("path3", 40)
    plan = compile_plan(q)
    whole = run_query(g, q, SchedulerConfig(workers=2)).total
    one = schedule_partitions(g, plan, build_partitions(g, 1, 40), 1, SchedulerConfig(workers=2)).total
    assert whole == one == len(mine_all(g, q))


def test_g1_two_partitions():
    out = run_query(g1(), parse_query(TRIANGLE_Q), SchedulerConfig(workers=2, partitions=2))
    assert out.total == 2


def test_skewed_partitions_steal_subpartitions():
    # every match lives in the first quarter of the timeline
    busy = [(0, 1 + (i % 50), i) for i in range(400)]
    quiet = [(100 + i, 101 + i, 10_000 + 100 * i) for i in range(1200)]
    g = TemporalGraph.from_edges(busy + quiet)
    q = shape_query([(0, 1), (0, 2)], 20)
    out = run_query(g, q, SchedulerConfig(workers=4, partitions=4, root_chunk=8))
    assert out.total == len(mine_all(g, q))
    assert out.stats.partition_steals >= 1


def test_stats_report():
    out = run_query(_star_graph(50), STAR3, SchedulerConfig(workers=2))
    doc = json.loads(out.stats.to_json())
    assert doc["schema"] == STATS_SCHEMA
    for key in ("matches", "iterations", "donations", "respawns", "steals", "workers"):
        assert key in doc
    assert len(doc["workers"]) == 2 and all("busy_time" in w for w in doc["workers"])
    assert doc["matches"] == out.total
    assert "busy" in out.stats.to_text()


def test_config_validation():
    for bad in (dict(workers=0), dict(root_chunk=0), dict(abort_timeout=-1.0), dict(signal_check_interval=0)):
        with pytest.raises(ValueError):
            run_query(g1(), parse_query(TRIANGLE_Q), SchedulerConfig(**bad))


def test_default_workers_env(monkeypatch):
    monkeypatch.setenv("TEMPEST_WORKERS", "3")
    assert default_workers() == 3 and SchedulerConfig().workers == 3


def test_worker_failure_propagates(monkeypatch):
    import tempest.runtime as rt

    def boom(*a, **k):
        raise RuntimeError("kernel exploded")

    monkeypatch.setattr(rt._Scheduler, "_execute", boom)
    with pytest.raises(RuntimeError, match="exploded"):
        run_query(g1(), parse_query(TRIANGLE_Q), SchedulerConfig(workers=3))


def test_empty_graph():
    g = TemporalGraph.from_edges([], n_vertices=0)
    assert run_query(g, parse_query(TRIANGLE_Q), SchedulerConfig(workers=2, partitions=2)).total == 0
