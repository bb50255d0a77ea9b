import random
from collections import Counter

import numpy as np
import pytest

from motifs import PATH2_ANTI_Q, SHAPES, TRIANGLE_Q, g1, g2, random_generalized_query, random_small_graph, shape_query
from tempest import _layout as L
from tempest.engine import (
    SearchContext, available_backends, backtrack, check_anti, descend, fan_out, find_next_match, make_kernel,
    mine_all, mine_root, refine_context, run_context, split_context, verify_match,
)
from tempest.graph import TemporalGraph
from tempest.oracle import brute_force_mine
from tempest.plan import compile_plan
from tempest.query import MotifEdge, MotifQuery, parse_query
from tempest.synth import random_graph


def _collect(ctx, kernel):
    found = []
    run_context(ctx, kernel, found.append)
    return found


def _kernel(graph, q, backend):
    plan = compile_plan(q if not isinstance(q, str) else parse_query(q))
    return make_kernel(graph, plan, backend)


# ---------------------------------------------------------------- mine_root examples

def test_mine_root_triangle(backend):
    k = _kernel(g1(), TRIANGLE_Q, backend)
    found = []
    mine_root(k.graph, k.plan, 0, found.append, kernel=k)
    assert found == [(0, 1, 2)]
    found.clear()
    mine_root(k.graph, k.plan, 3, found.append, kernel=k)
    assert found == []


def test_single_edge_motif_emits_every_root(backend):
    g = random_graph(np.random.default_rng(1), 10, 50, 30)
    q = shape_query([(0, 1)], 5)
    assert mine_all(g, q, backend) == [(e,) for e in range(g.n_edges)]


def test_g1_triangle_all_roots(backend):
    assert mine_all(g1(), parse_query(TRIANGLE_Q), backend) == [(0, 1, 2), (1, 2, 3)]


def test_g2_anti(backend):
    assert mine_all(g2(), parse_query(PATH2_ANTI_Q), backend) == [(1, 3), (3, 4)]


# ---------------------------------------------------------------- step API

def test_step_through_g1_triangle(backend):
    k = _kernel(g1(), TRIANGLE_Q, backend)
    ctx = SearchContext.for_roots(k, 0, 1)
    assert find_next_match(ctx, k) == 0
    assert descend(ctx, k, 0) == L.DESCENDED
    assert ctx.level == 1 and ctx.t_limit == 40
    # level 1 scans out(1) restricted to (t, idx) > (10, 0) and t <= 40
    assert [int(k.graph.adj[p]) for p in range(*ctx.range(1))] == [1]
    assert ctx.mapping[:2].tolist() == [0, 1]
    assert find_next_match(ctx, k) == 1
    assert descend(ctx, k, 1) == L.DESCENDED
    assert find_next_match(ctx, k) == 2
    out = np.empty((4, 3), dtype=np.int64)
    assert descend(ctx, k, 2, out) == L.EMIT
    assert out[0].tolist() == [0, 1, 2]
    assert ctx.estack(k.plan) == [0, 1]
    # exhaust level 2, back to 1, back to 0, done
    assert find_next_match(ctx, k) is None
    assert not backtrack(ctx, k) and ctx.level == 1
    assert find_next_match(ctx, k) is None
    assert not backtrack(ctx, k) and ctx.level == 0
    assert find_next_match(ctx, k) is None
    assert backtrack(ctx, k)


def test_window_cap_excludes_late_edge(backend):
    k = _kernel(g1(), TRIANGLE_Q, backend)
    ctx = SearchContext.for_roots(k, 3, 4)
    assert find_next_match(ctx, k) == 3
    descend(ctx, k, 3)
    assert ctx.remaining(1) == 0
    assert find_next_match(ctx, k) is None


def test_fine_bound_exhausts_level(backend):
    q = shape_query("triangle", 30, fg_delta={0: 5})
    k = _kernel(g1(), q, backend)
    ctx = SearchContext.for_roots(k, 0, 1)
    descend(ctx, k, find_next_match(ctx, k))
    assert find_next_match(ctx, k) is None


def test_empty_range_is_exhausted(backend):
    k = _kernel(g1(), TRIANGLE_Q, backend)
    ctx = SearchContext.for_roots(k, 2, 2)
    assert find_next_match(ctx, k) is None
    assert backtrack(ctx, k)


def test_single_edge_motif_first_backtrack_done(backend):
    k = _kernel(g1(), shape_query([(0, 1)], 5), backend)
    ctx = SearchContext.for_roots(k, 0, 1)
    assert descend(ctx, k, find_next_match(ctx, k)) == L.EMIT
    assert find_next_match(ctx, k) is None
    assert backtrack(ctx, k)


def test_check_anti_examples(backend):
    q = parse_query(PATH2_ANTI_Q)
    g = g2()
    k = _kernel(g, q, backend)
    # g2 sorted: 0:(0,1,10) 1:(1,2,20) 2:(0,2,25) 3:(2,0,30) 4:(0,1,40) 5:(1,2,100)
    ctx = SearchContext.for_roots(k, 0, 1)
    descend(ctx, k, find_next_match(ctx, k))
    assert find_next_match(ctx, k) == 1
    assert descend(ctx, k, 1) == L.PRUNED
    assert check_anti(ctx, k, 2)
    ctx = SearchContext.for_roots(k, 1, 2)
    descend(ctx, k, find_next_match(ctx, k))
    assert find_next_match(ctx, k) == 3
    assert descend(ctx, k, 3) == L.EMIT
    assert not check_anti(ctx, k, 2)


def test_anti_zero_window(backend):
    g = TemporalGraph.from_edges([(0, 1, 10), (1, 2, 20), (0, 2, 21)])
    q = parse_query("pattern:\n  0 -> 1 @ 0\n  1 -> 2 @ 1\n  !0 -> 2 @ 2 attach=1 window=0\nconstraints:\n"
                    "  cg_delta = 30\n")
    assert mine_all(g, q, backend) == [(0, 1)]
    g = TemporalGraph.from_edges([(0, 1, 10), (1, 2, 20), (0, 2, 20)])
    assert mine_all(g, q, backend) == []


# ---------------------------------------------------------------- cache instrumentation

def test_backtrack_never_binary_searches(backend):
    g = random_graph(np.random.default_rng(4), 300, 10_000, 20_000)
    for shape in ("path3", "triangle", "cycle4"):
        k = _kernel(g, shape_query(shape, 400), backend)
        ctx = SearchContext.for_roots(k, 0, g.n_edges)
        stats = run_context(ctx, k)
        assert stats.binary_searches > 0
        assert stats.backtrack_binary_searches == 0


def test_backtrack_to_level0_resumes_without_search(backend):
    k = _kernel(g1(), TRIANGLE_Q, backend)
    ctx = SearchContext.for_roots(k, 0, 5)
    descend(ctx, k, find_next_match(ctx, k))
    before = int(ctx.buf[L.BSEARCH])
    assert ctx.remaining(0) == 4
    while find_next_match(ctx, k) is not None:
        pass
    backtrack(ctx, k)
    assert ctx.level == 0 and ctx.remaining(0) == 4
    assert int(ctx.buf[L.BSEARCH]) == before
    assert find_next_match(ctx, k) == 1


# ---------------------------------------------------------------- oracle agreement

def test_matches_oracle_small_random(backend):
    rng = random.Random(17)
    for _ in range(80):
        g = random_small_graph(rng, 12, 80, labels=True)
        q = random_generalized_query(rng, rng.choice(list(SHAPES)), 200)
        assert mine_all(g, q, backend) == brute_force_mine(g, q)


def test_backends_agree():
    if len(available_backends()) < 2:
        pytest.skip("compiled kernel not built")
    rng = random.Random(23)
    for _ in range(60):
        g = random_small_graph(rng, 20, 200, labels=True)
        q = random_generalized_query(rng, rng.choice(list(SHAPES)), 300)
        assert mine_all(g, q, "cython") == mine_all(g, q, "python")


def test_emitted_matches_verify(backend):
    rng = random.Random(29)
    for _ in range(60):
        g = random_small_graph(rng, 15, 150, labels=True)
        q = random_generalized_query(rng, rng.choice(list(SHAPES)), 300)
        for m in mine_all(g, q, backend):
            assert verify_match(g, q, m) is None


# ---------------------------------------------------------------- split / refine / fan-out

def _paused_contexts(rng, backend, n=40):
    """Random contexts stopped mid-search, with their full-run match multiset."""
    for _ in range(n):
        g = random_small_graph(rng, 8, 120)
        if g.n_edges == 0:
            continue
        q = random_generalized_query(rng, rng.choice(list(SHAPES)), 300, labels=False)
        k = _kernel(g, q, backend)
        ctx = SearchContext.for_roots(k, 0, g.n_edges)
        k.run(ctx.buf, np.zeros(2, np.int64), rng.randint(1, 200), 1 << 40, None)
        ctx.reset_counters()
        expect = Counter(_collect(ctx.copy(), k))
        yield k, ctx, expect


def test_split_preserves_matches(backend):
    rng = random.Random(31)
    for k, ctx, expect in _paused_contexts(rng, backend):
        kept, dons = split_context(ctx, k.plan, rng.randint(1, 5))
        got = Counter(_collect(kept, k))
        for d in dons:
            got += Counter(_collect(d, k))
        assert got == expect


def test_refine_and_fan_out_preserve_matches(backend):
    rng = random.Random(37)
    for k, ctx, expect in _paused_contexts(rng, backend):
        refined = refine_context(ctx, k)
        again = refine_context(refined, k)
        assert np.array_equal(again.buf, refined.buf)
        tasks = fan_out(refined, k, rng.choice([None, 2, 3]))
        got = Counter()
        for t in tasks:
            got += Counter(_collect(t, k))
        assert got == expect


def test_split_nothing_to_steal(backend):
    k = _kernel(g1(), TRIANGLE_Q, backend)
    ctx = SearchContext.for_roots(k, 0, 1)
    kept, dons = split_context(ctx, k.plan, 3)
    assert dons == [] and kept is ctx


def _two_level_ctx(backend):
    """Root A-chain where level 0 holds roots [A, B] and level 1 holds [L, M] (path motif)."""
    # roots 0 and 1 leave vertex 1; out(1) later holds L, M, and each ends a path at vertex 3
    edges = [(0, 1, 0), (5, 1, 1), (1, 2, 2), (1, 4, 3), (2, 3, 4), (4, 3, 5), (1, 6, 6)]
    g = TemporalGraph.from_edges(edges)
    q = shape_query("path3", 100)
    k = _kernel(g, q, backend)
    ctx = SearchContext.for_roots(k, 0, 2)
    descend(ctx, k, find_next_match(ctx, k))
    return g, k, ctx


def test_split_fig8_ordering(backend):
    g, k, ctx = _two_level_ctx(backend)
    assert ctx.remaining(0) == 1  # root B left
    assert ctx.remaining(1) == 3  # (1,2), (1,4), (1,6)
    expect = Counter(_collect(ctx.copy(), k))
    kept, dons = split_context(ctx, k.plan, 2)
    assert len(dons) == 2
    # deepest level first, first remaining candidate each time
    firsts = [int(k.graph.adj[d.beg[1]]) for d in dons]
    assert firsts == [2, 3]
    for d in dons:
        assert d.remaining(0) == 0 and d.remaining(1) == 1
    got = Counter(_collect(kept, k))
    for d in dons:
        got += Counter(_collect(d, k))
    assert got == expect


def test_fig9_refine_then_three_trees(backend):
    # path 0->1->2->3; root r=(a,b,0); out(b): A (t=1) and X beyond the window;
    # out(c): L, M, N inside the window and Y beyond it
    edges = [(9, 1, 0), (1, 2, 1), (2, 3, 2), (2, 4, 3), (2, 5, 4), (1, 7, 20), (2, 6, 30)]
    g = TemporalGraph.from_edges(edges)
    k = _kernel(g, shape_query("path3", 10), backend)
    ctx = SearchContext.for_roots(k, 0, 1)
    descend(ctx, k, find_next_match(ctx, k))
    a = find_next_match(ctx, k)
    descend(ctx, k, a)
    # loosen both lists to their full adjacency as an uncapped dump would hold them
    ctx.end[1] = g.out_ptr[2]
    ctx.end[2] = g.out_ptr[3]
    assert ctx.remaining(1) == 1 and ctx.remaining(2) == 4
    refined = refine_context(ctx, k)
    assert refined.remaining(1) == 0
    assert [int(g.adj[p]) for p in range(*refined.range(2))] == [2, 3, 4]
    tasks = fan_out(refined, k)
    assert len(tasks) == 3
    trees = [sorted(_collect(t, k)) for t in tasks]
    assert trees == [[(0, 1, 2)], [(0, 1, 3)], [(0, 1, 4)]]


def test_fan_out_detaches_unstarted_roots(backend):
    g, k, ctx = _two_level_ctx(backend)
    tasks = fan_out(ctx, k)
    assert tasks[1].level == 0 and tasks[1].remaining(0) == 1


# ---------------------------------------------------------------- verify_match

def test_verify_fine_bound_violation():
    # consecutive real edges 30 apart under a bound of 20
    g = TemporalGraph.from_edges([(0, 1, 0), (1, 2, 10), (2, 0, 40)])
    q = shape_query("triangle", 100, fg_delta={1: 20})
    assert verify_match(g, q, (0, 1, 2)) == "fg_delta"


def test_verify_window_violation():
    g = TemporalGraph.from_edges([(0, 1, 0), (1, 2, 10), (2, 0, 40)])
    assert verify_match(g, shape_query("triangle", 30), (0, 1, 2)) == "cg_delta"
    assert verify_match(g, shape_query("triangle", 40), (0, 1, 2)) is None


@pytest.mark.parametrize("match, reason", [
    ((0, 1), "arity"),
    ((0, 1, 9), "arity"),
    ((2, 1, 3), "temporal_order"),
    ((0, 2, 3), "structure"),
])
def test_verify_other_violations(match, reason):
    # sorted: 0:(0,1,0) 1:(1,2,10) 2:(0,1,15) 3:(2,0,20)
    g = TemporalGraph.from_edges([(0, 1, 0), (1, 2, 10), (2, 0, 20), (0, 1, 15)])
    assert verify_match(g, shape_query("triangle", 100), match) == reason


def test_verify_labels_and_anti():
    g = TemporalGraph.from_edges([(0, 1, 0, 1), (1, 2, 10, 0), (0, 2, 12, 0)], vertex_labels=[1, 0, 0])
    q = MotifQuery(edges=[MotifEdge(0, 1, 0, 0), MotifEdge(1, 2, 1)], cg_delta=50)
    assert verify_match(g, q, (0, 1)) == "edge_label"
    q = MotifQuery(edges=[MotifEdge(0, 1, 0), MotifEdge(1, 2, 1)], cg_delta=50, vertex_labels={1: 1})
    assert verify_match(g, q, (0, 1)) == "vertex_label"
    q = parse_query(PATH2_ANTI_Q)
    assert verify_match(g, q, (0, 1)) == "anti_edge"
