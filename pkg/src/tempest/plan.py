"""Compile a validated query into a per-level mining plan.

Each level of a search tree corresponds to one motif edge (real or anti) in
temporal order. The plan pre-decodes, per level, where candidates come from,
which mapping slots a new endpoint must differ from, how many slots are valid
on entry, the fine time bound, labels and anti-edge parameters. The search
kernels read the plan as a flat ``int64`` table (see ``COLUMNS``).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .query import MotifQuery, QueryError, validate_query


class Kind(IntEnum):
    REAL = 0
    ANTI = 1


class Source(IntEnum):
    OUT = 0    # out-list of the mapped source vertex
    IN = 1     # in-list of the mapped destination vertex
    BOTH = 2   # both mapped: shorter of the two, other endpoint checked by equality
    ALL = 3    # neither mapped: every later edge (level 0, or allow_disconnected)


NONE = -1

# plan table columns
(C_KIND, C_USLOT, C_VSLOT, C_UNEW, C_VNEW, C_SOURCE, C_NEQ_U, C_NEQ_V, C_NVALID,
 C_FG, C_LAST_REAL, C_ATTACH, C_WINDOW, C_ULABEL, C_VLABEL, C_ELABEL, C_REAL_POS) = range(17)
COLUMNS = 17

MAX_SLOTS = 62


@dataclass(frozen=True)
class LevelPlan:
    kind: Kind
    u_slot: int
    v_slot: int
    u_new: bool
    v_new: bool
    source: Source | None
    neq_checks_src: tuple[int, ...]
    neq_checks_dst: tuple[int, ...]
    n_valid_slots_before: int
    fg_bound: int | None
    last_real_level: int
    attach_level: int | None = None
    window: int | None = None
    labels: tuple[int | None, int | None, int | None] = (None, None, None)
    real_pos: int = NONE

    @property
    def candidate_source(self) -> str:
        if self.kind is Kind.ANTI:
            return "anti"
        if self.source is Source.OUT:
            return f"OutOf(slot{self.u_slot})"
        if self.source is Source.IN:
            return f"InOf(slot{self.v_slot})"
        if self.source is Source.BOTH:
            return f"BothMapped(slot{self.u_slot}, slot{self.v_slot})"
        return "AllEdges"


@dataclass(frozen=True)
class MiningPlan:
    levels: tuple[LevelPlan, ...]
    n_motif_vertices: int
    cg_delta: int
    enumerate: bool
    max_matches: int | None
    table: np.ndarray

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def n_real(self) -> int:
        return sum(1 for lv in self.levels if lv.kind is Kind.REAL)

    @property
    def root_labels(self) -> tuple[int | None, int | None, int | None]:
        return self.levels[0].labels

    @property
    def real_levels(self) -> list[int]:
        return [i for i, lv in enumerate(self.levels) if lv.kind is Kind.REAL]


def _mask(slots) -> int:
    m = 0
    for s in slots:
        m |= 1 << s
    return m


def compile_plan(q: MotifQuery) -> MiningPlan:
    diags = validate_query(q)
    if diags:
        raise QueryError("; ".join(diags), diagnostics=diags)
    real = q.real_edges
    real_index = {e.order: i for i, e in enumerate(real)}
    items = sorted([(e.order, e) for e in real] + [(a.order, a) for a in q.anti_edges],
                   key=lambda p: p[0])

    slot_of: dict[int, int] = {}
    level_of_real: dict[int, int] = {}
    levels: list[LevelPlan] = []
    last_real = NONE
    for lvl, (order, item) in enumerate(items):
        n_valid = len(slot_of)
        if order in real_index:
            ri = real_index[order]
            u_new = item.u not in slot_of
            if u_new:
                slot_of[item.u] = len(slot_of)
            v_new = item.v not in slot_of
            if v_new:
                slot_of[item.v] = len(slot_of)
            us, vs = slot_of[item.u], slot_of[item.v]
            # a new endpoint must differ from every other already-mapped vertex
            neq_u = tuple(range(n_valid)) if u_new else ()
            neq_v = tuple(s for s in range(vs) if s != vs) if v_new else ()
            if lvl == 0 or (u_new and v_new):
                source = Source.ALL
            elif not u_new and not v_new:
                source = Source.BOTH
            elif not u_new:
                source = Source.OUT
            else:
                source = Source.IN
            fg = q.fg_delta.get(ri - 1) if ri > 0 else None
            labels = (q.vertex_labels.get(item.u) if u_new else None,
                      q.vertex_labels.get(item.v) if v_new else None,
                      item.label)
            levels.append(LevelPlan(Kind.REAL, us, vs, u_new, v_new, source, neq_u, neq_v, n_valid,
                                    fg, last_real, labels=labels, real_pos=ri))
            level_of_real[ri] = lvl
            last_real = lvl
        else:
            levels.append(LevelPlan(Kind.ANTI, slot_of[item.u], slot_of[item.v], False, False, None,
                                    (), (), n_valid, None, last_real,
                                    attach_level=level_of_real[item.attach], window=item.window))
    if len(slot_of) > MAX_SLOTS:
        raise QueryError(f"motif has {len(slot_of)} vertices; at most {MAX_SLOTS} supported")

    table = np.full((len(levels), COLUMNS), NONE, dtype=np.int64)
    for i, lv in enumerate(levels):
        row = table[i]
        row[C_KIND] = int(lv.kind)
        row[C_USLOT], row[C_VSLOT] = lv.u_slot, lv.v_slot
        row[C_UNEW], row[C_VNEW] = int(lv.u_new), int(lv.v_new)
        row[C_SOURCE] = NONE if lv.source is None else int(lv.source)
        row[C_NEQ_U], row[C_NEQ_V] = _mask(lv.neq_checks_src), _mask(lv.neq_checks_dst)
        row[C_NVALID] = lv.n_valid_slots_before
        row[C_FG] = NONE if lv.fg_bound is None else lv.fg_bound
        row[C_LAST_REAL] = lv.last_real_level
        if lv.kind is Kind.ANTI:
            row[C_ATTACH], row[C_WINDOW] = lv.attach_level, lv.window
        for col, lab in zip((C_ULABEL, C_VLABEL, C_ELABEL), lv.labels):
            row[col] = NONE if lab is None else lab
        row[C_REAL_POS] = lv.real_pos
    table.setflags(write=False)
    return MiningPlan(tuple(levels), len(slot_of), q.cg_delta, q.enumerate, q.max_matches, table)


def candidate_list_choice(level: LevelPlan, graph, mapping) -> tuple[str, int, np.ndarray]:
    """Pick the adjacency list a level scans: ``(kind, vertex, edge_indices)``.

    For ``BothMapped`` the shorter of out(u) / in(v) is chosen, ties going to in(v);
    the opposite endpoint is then enforced by an equality check.
    """
    if level.source is Source.OUT:
        x = int(mapping[level.u_slot])
        return "out", x, graph.out_edges(x)
    if level.source is Source.IN:
        y = int(mapping[level.v_slot])
        return "in", y, graph.in_edges(y)
    if level.source is Source.BOTH:
        x, y = int(mapping[level.u_slot]), int(mapping[level.v_slot])
        out_len = graph.out_ptr[x + 1] - graph.out_ptr[x]
        in_len = graph.in_ptr[y + 1] - graph.in_ptr[y]
        if out_len < in_len:
            return "out", x, graph.out_edges(x)
        return "in", y, graph.in_edges(y)
    return "all", -1, np.arange(graph.n_edges, dtype=np.int32)


def struct_constraints_reference(plan: MiningPlan, level: int, mapping, graph, e) -> bool:
    """Algorithm-style structural check using a full reverse map (reference for tests)."""
    lv = plan.levels[level]
    s, d = int(graph.src[e]), int(graph.dst[e])
    mapped = {int(mapping[k]): k for k in range(lv.n_valid_slots_before)}
    u_g = int(mapping[lv.u_slot]) if not lv.u_new else -1
    v_g = int(mapping[lv.v_slot]) if not lv.v_new else -1
    u_ok = u_g == s or (u_g < 0 and s not in mapped)
    if lv.u_new:
        mapped[s] = lv.u_slot
    v_ok = v_g == d or (v_g < 0 and d not in mapped)
    return u_ok and v_ok


def dump_plan(plan: MiningPlan) -> str:
    lines = [f"plan: {plan.n_levels} levels, {plan.n_motif_vertices} slots, cg_delta={plan.cg_delta}",
             f"{'lvl':>3} {'kind':<4} {'src':>5} {'dst':>5} {'source':<26} {'neq_src':<12} "
             f"{'neq_dst':<12} {'valid':>5} {'fg':>6} {'last':>4} extra"]
    for i, lv in enumerate(plan.levels):
        src = f"s{lv.u_slot}" + ("*" if lv.u_new else "")
        dst = f"s{lv.v_slot}" + ("*" if lv.v_new else "")
        extra = []
        if lv.kind is Kind.ANTI:
            extra.append(f"attach_level={lv.attach_level} window={lv.window}")
        if any(x is not None for x in lv.labels):
            extra.append("labels=" + ",".join("-" if x is None else str(x) for x in lv.labels))
        lines.append(
            f"{i:>3} {lv.kind.name:<4} {src:>5} {dst:>5} {lv.candidate_source:<26} "
            f"{','.join(map(str, lv.neq_checks_src)) or '-':<12} "
            f"{','.join(map(str, lv.neq_checks_dst)) or '-':<12} {lv.n_valid_slots_before:>5} "
            f"{'-' if lv.fg_bound is None else lv.fg_bound:>6} {lv.last_real_level:>4} {' '.join(extra)}"
        )
    lines.append("(* = slot first mapped at this level)")
    return "\n".join(lines)
