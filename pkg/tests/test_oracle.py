import itertools
import random

import numpy as np
import pytest

from motifs import G1_EDGES, PATH2_ANTI_Q, SHAPES, TRIANGLE_Q, g1, g2, random_small_graph, shape_query
from tempest.graph import TemporalGraph
from tempest.oracle import OracleTooLarge, brute_force_count, brute_force_mine
from tempest.query import parse_query
from tempest.synth import random_graph


def _hand_count(edges, shape, delta):
    """Independent triple-loop count over raw tuples (sorted stably by time)."""
    es = sorted(edges, key=lambda e: e[2])
    k = len(shape)
    out = []
    for combo in itertools.combinations(range(len(es)), k):
        m = {}
        ok = True
        for (mu, mv), i in zip(shape, combo):
            for a, b in ((mu, es[i][0]), (mv, es[i][1])):
                ok &= m.setdefault(a, b) == b
        ok &= len(set(m.values())) == len(m)
        ok &= es[combo[-1]][2] - es[combo[0]][2] <= delta
        if ok:
            out.append(combo)
    return out


def test_g1_triangle():
    assert brute_force_mine(g1(), parse_query(TRIANGLE_Q)) == [(0, 1, 2), (1, 2, 3)]
    assert _hand_count(G1_EDGES, SHAPES["triangle"], 30) == [(0, 1, 2), (1, 2, 3)]


def test_single_edge_motif_counts_every_edge():
    g = random_graph(np.random.default_rng(0), 10, 40, 100)
    assert brute_force_count(g, shape_query([(0, 1)], 1)) == g.n_edges


def test_g2_anti_excludes_witnessed_match():
    q = parse_query(PATH2_ANTI_Q)
    got = brute_force_mine(g2(), q)
    assert len(got) == 2
    assert (0, 1) not in got  # (0,1,10),(1,2,20) killed by (0,2,25)


def test_guard():
    g = random_graph(np.random.default_rng(0), 10, 50, 100)
    with pytest.raises(OracleTooLarge):
        brute_force_mine(g, shape_query("triangle", 5), guard=10)
    brute_force_mine(g, shape_query("triangle", 5), guard=10, force=True)


def test_matches_hand_enumeration():
    rng = random.Random(3)
    for _ in range(40):
        m = rng.randint(0, 25)
        edges = [(rng.randrange(5), rng.randrange(5), rng.randint(0, 40)) for _ in range(m)]
        g = TemporalGraph.from_edges(edges, n_vertices=5)
        shape = rng.choice(["path3", "triangle", "cycle4"])
        delta = rng.randint(1, 40)
        assert brute_force_mine(g, shape_query(shape, delta)) == _hand_count(edges, SHAPES[shape], delta)


def test_independent_of_input_order():
    # any shuffle that keeps equal-timestamp edges in their relative order normalises to the same graph
    rng = random.Random(8)
    for _ in range(20):
        m = rng.randint(1, 60)
        edges = [(rng.randrange(6), rng.randrange(6), rng.randint(0, 50)) for _ in range(m)]
        q = shape_query(rng.choice(list(SHAPES)), rng.randint(5, 50))
        a = brute_force_mine(TemporalGraph.from_edges(edges, n_vertices=6), q)
        by_time = {}
        for e in edges:
            by_time.setdefault(e[2], []).append(e)
        order = sorted(by_time, key=lambda t: rng.random())
        shuffled = []
        queues = {t: list(v) for t, v in by_time.items()}
        while any(queues.values()):
            t = rng.choice([t for t in order if queues[t]])
            shuffled.append(queues[t].pop(0))
        assert brute_force_mine(TemporalGraph.from_edges(shuffled, n_vertices=6), q) == a


def test_subsumption_fg_at_least_cg():
    rng = random.Random(12)
    for _ in range(40):
        g = random_small_graph(rng, 10, 80)
        shape = rng.choice(list(SHAPES))
        d = rng.randint(1, 200)
        plain = brute_force_mine(g, shape_query(shape, d))
        fg = {i: d + rng.randint(0, 50) for i in range(len(SHAPES[shape]) - 1)}
        assert brute_force_mine(g, shape_query(shape, d, fg_delta=fg)) == plain
