"""Motif query model, text/JSON parsing and validation.

Query text is a sectioned key/value document::

    pattern:
      0 -> 1 @ 0
      1 -> 2 @ 1
      2 -> 0 @ 2
    in_graph: data/g1.txt
    constraints:
      cg_delta = 30s
      fg_delta 0 = 20s          # gap between real edges 0 and 1
      vertex_label 0 = 1
      edge_label 2 = 3
      !2 -> 0 @ 3 attach=1 window=10s
    runtime_params:
      enumerate = false
      max_matches = 100
      workers = 4

Edge orders are dense over real edges and anti-edges together. ``attach``
names a real edge by its index among real edges in temporal order; fine
gaps are indexed the same way (gap ``i`` sits between real edges ``i`` and
``i+1``).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any

DURATION_UNITS = {"s": 1, "m": 60, "h": 3600, "d": 86400}

SECTIONS = ("pattern", "in_graph", "constraints", "runtime_params")
RUNTIME_KEYS = {
    "enumerate", "max_matches", "workers", "partitions", "allow_disconnected",
    "steal_after", "signal_interval", "abort_timeout_ms", "root_chunk", "canonical",
}


class QueryError(ValueError):
    """Query text could not be parsed or failed validation."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None,
                 diagnostics: list[str] | None = None):
        self.line = line
        self.column = column
        self.diagnostics = diagnostics or []
        where = f"line {line}" + (f", column {column}" if column else "") + ": " if line else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class MotifEdge:
    u: int
    v: int
    order: int
    label: int | None = None


@dataclass(frozen=True)
class AntiEdge:
    u: int
    v: int
    attach: int
    window: int
    order: int


@dataclass
class MotifQuery:
    edges: list[MotifEdge]
    cg_delta: int
    anti_edges: list[AntiEdge] = field(default_factory=list)
    fg_delta: dict[int, int] = field(default_factory=dict)
    vertex_labels: dict[int, int] = field(default_factory=dict)
    enumerate: bool = False
    max_matches: int | None = None
    in_graph: str | None = None
    runtime: dict[str, Any] = field(default_factory=dict)

    @property
    def real_edges(self) -> list[MotifEdge]:
        """Real edges in temporal order."""
        return sorted(self.edges, key=lambda e: e.order)

    @property
    def n_vertices(self) -> int:
        vs = {x for e in self.edges for x in (e.u, e.v)}
        vs |= {x for a in self.anti_edges for x in (a.u, a.v)}
        return max(vs) + 1 if vs else 0

    @property
    def allow_disconnected(self) -> bool:
        return bool(self.runtime.get("allow_disconnected", False))

    @property
    def edge_labels(self) -> dict[int, int]:
        return {i: e.label for i, e in enumerate(self.real_edges) if e.label is not None}

    def closure_delta(self) -> int:
        """Time reach of one search tree past its root; anti-edge windows can extend it."""
        extra = max((a.window for a in self.anti_edges), default=0)
        return self.cg_delta + extra


# --------------------------------------------------------------------------- durations

def parse_duration(text: str) -> int:
    s = text.strip().lower()
    m = re.fullmatch(r"(\d+)\s*([smhd]?)", s)
    if not m:
        raise ValueError(f"bad duration {text!r} (use an integer with optional s/m/h/d suffix)")
    return int(m.group(1)) * DURATION_UNITS.get(m.group(2) or "s")


def format_duration(seconds: int) -> str:
    for unit in ("d", "h", "m"):
        size = DURATION_UNITS[unit]
        if seconds and seconds % size == 0:
            return f"{seconds // size}{unit}"
    return f"{seconds}s"


# --------------------------------------------------------------------------- text grammar

_EDGE_RE = re.compile(r"^(\d+)\s*->\s*(\d+)\s*@\s*(\d+)(?:\s+label\s*=\s*(-?\d+))?$")
_ANTI_RE = re.compile(
    r"^!\s*(\d+)\s*->\s*(\d+)\s*@\s*(\d+)\s+attach\s*=\s*(\d+)\s+window\s*=\s*(\S+)$"
)
_KV_RE = re.compile(r"^([a-z_]+)(?:\s+(\d+))?\s*[=:]\s*(.+)$")


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def parse_query(text: str, validate: bool = True) -> MotifQuery:
    edges: list[MotifEdge] = []
    anti: list[AntiEdge] = []
    fg: dict[int, int] = {}
    vlabels: dict[int, int] = {}
    elabels: dict[int, int] = {}
    runtime: dict[str, Any] = {}
    cg = None
    in_graph = None
    section = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        body = line.strip()
        head = re.match(r"^([a-z_]+)\s*:\s*(.*)$", body)
        if indent == 0 and head and head.group(1) in SECTIONS:
            section = head.group(1)
            rest = head.group(2).strip()
            if section == "in_graph":
                in_graph = rest or None
            elif rest:
                raise QueryError(f"unexpected text after section header {section!r}", lineno, indent + 1)
            continue
        if indent == 0:
            raise QueryError(f"unknown section {body.split(':')[0]!r}", lineno, 1)
        col = indent + 1
        try:
            if body.startswith("!"):
                m = _ANTI_RE.match(body)
                if not m or section not in ("pattern", "constraints"):
                    raise QueryError("malformed anti-edge (expected '!u -> v @ order attach=<edge> window=<dur>')",
                                     lineno, col)
                anti.append(AntiEdge(int(m.group(1)), int(m.group(2)), attach=int(m.group(4)),
                                     window=parse_duration(m.group(5)), order=int(m.group(3))))
                continue
            if section == "pattern":
                m = _EDGE_RE.match(body)
                if not m:
                    raise QueryError("malformed edge (expected 'u -> v @ order')", lineno, col)
                lab = int(m.group(4)) if m.group(4) is not None else None
                edges.append(MotifEdge(int(m.group(1)), int(m.group(2)), int(m.group(3)), lab))
                continue
            m = _KV_RE.match(body)
            if not m:
                raise QueryError(f"cannot parse {body!r}", lineno, col)
            key, idx, value = m.group(1), m.group(2), m.group(3).strip()
            if section == "constraints":
                if key == "cg_delta" and idx is None:
                    cg = parse_duration(value)
                elif key == "fg_delta" and idx is not None:
                    fg[int(idx)] = parse_duration(value)
                elif key == "vertex_label" and idx is not None:
                    vlabels[int(idx)] = int(value)
                elif key == "edge_label" and idx is not None:
                    elabels[int(idx)] = int(value)
                else:
                    raise QueryError(f"unknown constraint key {key!r}", lineno, col)
            elif section == "runtime_params":
                if key not in RUNTIME_KEYS or idx is not None:
                    raise QueryError(f"unknown runtime parameter {key!r}", lineno, col)
                if key in ("enumerate", "allow_disconnected", "canonical"):
                    runtime[key] = _bool(value)
                else:
                    runtime[key] = int(value)
            else:
                raise QueryError("entry outside of any section", lineno, col)
        except ValueError as exc:
            if isinstance(exc, QueryError):
                raise
            raise QueryError(str(exc), lineno, col) from None

    if cg is None:
        raise QueryError("missing constraints.cg_delta")
    real = sorted(edges, key=lambda e: e.order)
    for i, lab in elabels.items():
        if not 0 <= i < len(real):
            raise QueryError(f"edge_label refers to unknown real edge {i}")
        real[i] = MotifEdge(real[i].u, real[i].v, real[i].order, lab)
    q = MotifQuery(edges=real, cg_delta=cg, anti_edges=sorted(anti, key=lambda a: a.order),
                   fg_delta=fg, vertex_labels=vlabels,
                   enumerate=bool(runtime.pop("enumerate", False)),
                   max_matches=runtime.pop("max_matches", None),
                   in_graph=in_graph, runtime=runtime)
    if validate:
        diags = validate_query(q)
        if diags:
            raise QueryError("; ".join(diags), diagnostics=diags)
    return q


def serialize_query(q: MotifQuery) -> str:
    out = ["pattern:"]
    for e in q.real_edges:
        lab = f" label={e.label}" if e.label is not None else ""
        out.append(f"  {e.u} -> {e.v} @ {e.order}{lab}")
    if q.in_graph:
        out.append(f"in_graph: {q.in_graph}")
    out.append("constraints:")
    out.append(f"  cg_delta = {q.cg_delta}")
    for i in sorted(q.fg_delta):
        out.append(f"  fg_delta {i} = {q.fg_delta[i]}")
    for v in sorted(q.vertex_labels):
        out.append(f"  vertex_label {v} = {q.vertex_labels[v]}")
    for a in q.anti_edges:
        out.append(f"  !{a.u} -> {a.v} @ {a.order} attach={a.attach} window={a.window}")
    params = dict(q.runtime)
    params["enumerate"] = q.enumerate
    if q.max_matches is not None:
        params["max_matches"] = q.max_matches
    out.append("runtime_params:")
    for k in sorted(params):
        v = params[k]
        out.append(f"  {k} = {str(v).lower() if isinstance(v, bool) else v}")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------- JSON form

def query_from_json(doc: str | dict, validate: bool = True) -> MotifQuery:
    """Same structure as the text form; durations are integer seconds."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise QueryError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise QueryError(f"unknown key(s) {sorted(unknown)}")
    edges = []
    for item in doc.get("pattern", []):
        if isinstance(item, str):
            m = _EDGE_RE.match(item.strip())
            if not m:
                raise QueryError(f"malformed edge {item!r}")
            edges.append(MotifEdge(int(m.group(1)), int(m.group(2)), int(m.group(3)),
                                   int(m.group(4)) if m.group(4) else None))
        else:
            edges.append(MotifEdge(int(item["u"]), int(item["v"]), int(item["order"]), item.get("label")))
    cons = dict(doc.get("constraints", {}))
    if "cg_delta" not in cons:
        raise QueryError("missing constraints.cg_delta")
    allowed = {"cg_delta", "fg_delta", "vertex_labels", "edge_labels", "anti_edges"}
    if set(cons) - allowed:
        raise QueryError(f"unknown constraint key(s) {sorted(set(cons) - allowed)}")
    real = sorted(edges, key=lambda e: e.order)
    for i, lab in cons.get("edge_labels", {}).items():
        i = int(i)
        real[i] = MotifEdge(real[i].u, real[i].v, real[i].order, int(lab))
    anti = [AntiEdge(int(a["u"]), int(a["v"]), attach=int(a["attach"]), window=int(a["window"]),
                     order=int(a["order"])) for a in cons.get("anti_edges", [])]
    runtime = dict(doc.get("runtime_params", {}))
    if set(runtime) - RUNTIME_KEYS:
        raise QueryError(f"unknown runtime parameter(s) {sorted(set(runtime) - RUNTIME_KEYS)}")
    q = MotifQuery(edges=real, cg_delta=int(cons["cg_delta"]),
                   anti_edges=sorted(anti, key=lambda a: a.order),
                   fg_delta={int(k): int(v) for k, v in cons.get("fg_delta", {}).items()},
                   vertex_labels={int(k): int(v) for k, v in cons.get("vertex_labels", {}).items()},
                   enumerate=bool(runtime.pop("enumerate", False)),
                   max_matches=runtime.pop("max_matches", None),
                   in_graph=doc.get("in_graph"), runtime=runtime)
    if validate:
        diags = validate_query(q)
        if diags:
            raise QueryError("; ".join(diags), diagnostics=diags)
    return q


def query_to_json(q: MotifQuery) -> dict:
    runtime = dict(q.runtime, enumerate=q.enumerate)
    if q.max_matches is not None:
        runtime["max_matches"] = q.max_matches
    doc = {
        "pattern": [{"u": e.u, "v": e.v, "order": e.order} for e in q.real_edges],
        "constraints": {
            "cg_delta": q.cg_delta,
            "fg_delta": {str(k): v for k, v in q.fg_delta.items()},
            "vertex_labels": {str(k): v for k, v in q.vertex_labels.items()},
            "edge_labels": {str(k): v for k, v in q.edge_labels.items()},
            "anti_edges": [{"u": a.u, "v": a.v, "order": a.order, "attach": a.attach, "window": a.window}
                           for a in q.anti_edges],
        },
        "runtime_params": runtime,
    }
    if q.in_graph:
        doc["in_graph"] = q.in_graph
    return doc


def load_query(path: str) -> MotifQuery:
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".json") or text.lstrip().startswith("{"):
        return query_from_json(text)
    return parse_query(text)


# --------------------------------------------------------------------------- validation

def validate_query(q: MotifQuery) -> list[str]:
    """Return one diagnostic per violated invariant; an empty list means valid."""
    diags: list[str] = []
    real = q.real_edges
    if not real:
        return ["query needs at least one real edge"]
    if q.cg_delta <= 0:
        diags.append(f"cg_delta must be > 0 (got {q.cg_delta})")
    for i, d in sorted(q.fg_delta.items()):
        if not 0 <= i < len(real) - 1:
            diags.append(f"fg_delta gap {i} does not exist (motif has {len(real)} real edges)")
        if d <= 0:
            diags.append(f"fg_delta {i} must be > 0 (got {d})")

    orders = [e.order for e in real] + [a.order for a in q.anti_edges]
    if sorted(orders) != list(range(len(orders))):
        diags.append(f"edge orders must be unique and dense from 0 (got {sorted(orders)})")
    for e in real:
        if e.u == e.v:
            diags.append(f"motif self-loop {e.u}->{e.v} at order {e.order}")
    for a in q.anti_edges:
        if a.u == a.v:
            diags.append(f"motif self-loop in anti-edge {a.u}->{a.v} at order {a.order}")

    verts = {x for e in real for x in (e.u, e.v)}
    if verts != set(range(len(verts))):
        diags.append(f"motif vertex ids must be dense from 0 (got {sorted(verts)})")
    for v in q.vertex_labels:
        if v not in verts:
            diags.append(f"vertex_label for unknown motif vertex {v}")

    seen: set[int] = set()
    for i, e in enumerate(real):
        if i > 0 and e.u not in seen and e.v not in seen and not q.allow_disconnected:
            diags.append(f"motif edge {e.u}->{e.v} at order {e.order} is disconnected from earlier edges "
                         "(set allow_disconnected=true to permit)")
        seen.update((e.u, e.v))

    for a in q.anti_edges:
        if not 0 <= a.attach < len(real):
            diags.append(f"anti-edge at order {a.order} attaches to unknown real edge {a.attach}")
            continue
        if real[a.attach].order >= a.order:
            diags.append(f"anti-edge at order {a.order} attaches to real edge {a.attach} "
                         f"which is not ordered before it")
        mapped = {x for e in real if e.order < a.order for x in (e.u, e.v)}
        if a.u not in mapped or a.v not in mapped:
            diags.append(f"anti-edge endpoint unmapped at order {a.order}")
        if a.window < 0:
            diags.append(f"anti-edge window must be >= 0 at order {a.order}")
    if q.enumerate and q.max_matches is not None and q.max_matches < 1:
        diags.append("max_matches must be >= 1 when enumerating")
    return diags
