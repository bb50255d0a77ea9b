import json
import random

import pytest

from motifs import SHAPES, add_random_anti, random_generalized_query, shape_query
from tempest.plan import compile_plan
from tempest.query import (
    AntiEdge, MotifEdge, MotifQuery, QueryError, load_query, parse_duration, parse_query, query_from_json,
    query_to_json, serialize_query, validate_query,
)

FOURCYCLE = """\
pattern:
  0 -> 1 @ 0
  1 -> 2 @ 1
  2 -> 3 @ 2
  3 -> 0 @ 4
in_graph: wiki.bin
constraints:
  cg_delta = 1h
  fg_delta 0 = 10m
  fg_delta 2 = 30m
  !2 -> 0 @ 3 attach=2 window=5m
runtime_params:
  enumerate = false
  workers = 4
"""


def test_fourcycle_with_anti_and_fine_bounds():
    q = parse_query(FOURCYCLE)
    assert [(e.u, e.v, e.order) for e in q.real_edges] == [(0, 1, 0), (1, 2, 1), (2, 3, 2), (3, 0, 4)]
    assert q.cg_delta == 3600
    assert q.fg_delta == {0: 600, 2: 1800}
    assert q.anti_edges == [AntiEdge(2, 0, attach=2, window=300, order=3)]
    assert q.in_graph == "wiki.bin"
    assert q.enumerate is False
    assert q.runtime == {"workers": 4}
    assert q.closure_delta() == 3900


def test_minimal_query():
    q = parse_query("pattern:\n  0 -> 1 @ 0\nconstraints:\n  cg_delta = 1s\n")
    assert len(q.edges) == 1 and q.cg_delta == 1
    assert q.fg_delta == {} and q.vertex_labels == {} and q.anti_edges == []
    assert not q.enumerate and q.max_matches is None


@pytest.mark.parametrize("text, secs", [("30", 30), ("30s", 30), ("2m", 120), ("3h", 10800), ("1d", 86400)])
def test_durations(text, secs):
    assert parse_duration(text) == secs


@pytest.mark.parametrize("bad", ["", "1w", "-3", "1.5h", "h"])
def test_bad_durations(bad):
    with pytest.raises(ValueError):
        parse_duration(bad)


def test_zero_cg_delta_rejected():
    with pytest.raises(QueryError, match="cg_delta must be > 0"):
        parse_query("pattern:\n  0 -> 1 @ 0\nconstraints:\n  cg_delta = 0\n")


@pytest.mark.parametrize("text, line, col", [
    ("pattern:\n  0 -> 1 @ 0\n  0 => 1 @ 1\nconstraints:\n  cg_delta = 1\n", 3, 3),
    ("pattern:\n  0 -> 1 @ 0\nconstraints:\n  cg_delta = 1\n  bogus = 3\n", 5, 3),
    ("pattern:\n  0 -> 1 @ 0\nconstraints:\n  cg_delta = 1\nruntime_params:\n    turbo = 1\n", 6, 5),
    ("patern:\n  0 -> 1 @ 0\n", 1, 1),
    ("pattern:\n  0 -> 1 @ 0\nconstraints:\n  cg_delta = 5x\n", 4, 3),
])
def test_syntax_errors_carry_position(text, line, col):
    with pytest.raises(QueryError) as ei:
        parse_query(text)
    assert (ei.value.line, ei.value.column) == (line, col)


def test_missing_cg_delta():
    with pytest.raises(QueryError, match="cg_delta"):
        parse_query("pattern:\n  0 -> 1 @ 0\n")


def test_validate_ok_triangle():
    assert validate_query(shape_query("triangle", 30)) == []


def test_validate_anti_unmapped():
    q = MotifQuery(edges=[MotifEdge(0, 1, 0), MotifEdge(1, 2, 2), MotifEdge(2, 3, 3)], cg_delta=10,
                   anti_edges=[AntiEdge(3, 0, attach=0, window=5, order=1)])
    assert "anti-edge endpoint unmapped at order 1" in validate_query(q)


def test_validate_self_loop():
    q = MotifQuery(edges=[MotifEdge(0, 0, 0)], cg_delta=10)
    assert any(d.startswith("motif self-loop") for d in validate_query(q))


def test_validate_collects_every_problem():
    q = MotifQuery(edges=[MotifEdge(0, 1, 0), MotifEdge(2, 3, 2)], cg_delta=-1, fg_delta={5: 0})
    diags = validate_query(q)
    assert len(diags) >= 4
    assert any("disconnected" in d for d in diags)
    assert any("orders" in d for d in diags)


def test_disconnected_allowed_by_flag():
    q = MotifQuery(edges=[MotifEdge(0, 1, 0), MotifEdge(2, 3, 1)], cg_delta=5,
                   runtime={"allow_disconnected": True})
    assert validate_query(q) == []
    assert compile_plan(q).levels[1].candidate_source == "AllEdges"


def test_fine_bound_may_exceed_cg_delta():
    assert validate_query(shape_query("path3", 10, fg_delta={0: 100})) == []


def test_anti_after_last_real_edge_is_valid():
    q = parse_query("pattern:\n  0 -> 1 @ 0\n  !1 -> 0 @ 1 attach=0 window=5\nconstraints:\n  cg_delta = 9\n")
    assert validate_query(q) == []


def test_anti_attach_must_precede():
    q = MotifQuery(edges=[MotifEdge(0, 1, 0), MotifEdge(1, 2, 2)], cg_delta=10,
                   anti_edges=[AntiEdge(0, 1, attach=1, window=5, order=1)])
    assert any("not ordered before" in d for d in validate_query(q))


def _queries(n=60):
    rng = random.Random(11)
    out = [parse_query(FOURCYCLE)]
    for _ in range(n):
        out.append(random_generalized_query(rng, rng.choice(list(SHAPES)), 500))
    return out


@pytest.mark.parametrize("q", _queries())
def test_text_round_trip(q):
    assert parse_query(serialize_query(q)) == q


@pytest.mark.parametrize("q", _queries(20))
def test_json_round_trip(q):
    doc = json.dumps(query_to_json(q))
    assert query_from_json(doc) == q
    assert query_from_json(doc) == parse_query(serialize_query(q))


def test_json_errors():
    with pytest.raises(QueryError, match="invalid JSON"):
        query_from_json("{nope")
    with pytest.raises(QueryError, match="unknown key"):
        query_from_json({"pattern": [], "extra": 1})
    with pytest.raises(QueryError, match="unknown runtime"):
        query_from_json({"pattern": ["0 -> 1 @ 0"], "constraints": {"cg_delta": 3}, "runtime_params": {"x": 1}})


def test_load_query_by_extension(tmp_path):
    q = parse_query(FOURCYCLE)
    (tmp_path / "q.json").write_text(json.dumps(query_to_json(q)))
    (tmp_path / "q.txt").write_text(FOURCYCLE)
    assert load_query(str(tmp_path / "q.json")) == load_query(str(tmp_path / "q.txt")) == q


def test_every_valid_query_compiles():
    rng = random.Random(5)
    for _ in range(200):
        q = shape_query(rng.choice(list(SHAPES)), rng.randint(1, 50))
        for _ in range(rng.randint(0, 3)):
            q = add_random_anti(rng, q, 20)
        assert validate_query(q) == []
        compile_plan(q)
