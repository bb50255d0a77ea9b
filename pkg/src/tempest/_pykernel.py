"""Pure-Python search kernel: the fallback backend and the step-wise reference."""
from __future__ import annotations

import numpy as np

from . import _layout as L
from .plan import (C_ATTACH, C_ELABEL, C_FG, C_KIND, C_LAST_REAL, C_NEQ_U, C_NEQ_V, C_SOURCE,
                   C_ULABEL, C_UNEW, C_USLOT, C_VLABEL, C_VNEW, C_VSLOT, C_WINDOW, Kind, Source)


def _bits(mask: int) -> list[int]:
    out = []
    k = 0
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return out


class Kernel:
    """Runs search contexts for one (graph, plan) pair."""

    backend = "python"

    def __init__(self, graph, plan):
        self.graph = graph
        self.plan = plan
        self.n = graph.n_edges
        self.src = graph.src.tolist()
        self.dst = graph.dst.tolist()
        self.t = graph.t.tolist()
        self.elab = graph.edge_labels.tolist() if graph.edge_labels is not None else None
        self.vlab = graph.vertex_labels.tolist() if graph.vertex_labels is not None else None
        self.adj = graph.adj.tolist()
        self.out_ptr = graph.out_ptr.tolist()
        self.in_ptr = graph.in_ptr.tolist()
        self.rows = [
            dict(kind=int(r[C_KIND]), us=int(r[C_USLOT]), vs=int(r[C_VSLOT]), unew=bool(r[C_UNEW]),
                 vnew=bool(r[C_VNEW]), source=int(r[C_SOURCE]), neq_u=_bits(int(r[C_NEQ_U])),
                 neq_v=_bits(int(r[C_NEQ_V])), fg=int(r[C_FG]), last_real=int(r[C_LAST_REAL]),
                 attach=int(r[C_ATTACH]), window=int(r[C_WINDOW]), ulab=int(r[C_ULABEL]),
                 vlab=int(r[C_VLABEL]), elab=int(r[C_ELABEL]))
            for r in plan.table
        ]
        self.n_levels = plan.n_levels
        self.n_slots = plan.n_motif_vertices
        self.cg = plan.cg_delta
        self.real_levels = plan.real_levels
        self.M, self.B, self.E, self.S, self.size = L.offsets(self.n_slots, self.n_levels)

    # ------------------------------------------------------------------ contexts

    def new_context(self, root_lo: int, root_hi: int, signal_interval: int = 1024,
                    steal_after: int = 20) -> np.ndarray:
        """Context whose level-0 range is roots ``[root_lo, root_hi)`` of this graph."""
        ctx = np.zeros(self.size, dtype=np.int64)
        ctx[self.M:self.M + self.n_slots] = -1
        ctx[self.B] = 2 * self.n + root_lo
        ctx[self.E] = 2 * self.n + root_hi
        ctx[L.NEXT_SIG] = signal_interval
        ctx[L.STEAL_MIN] = steal_after
        return ctx

    # ------------------------------------------------------------------ steps

    def cap(self, ctx, lvl: int) -> int:
        """Latest admissible timestamp for a candidate at ``lvl`` (> 0)."""
        row = self.rows[lvl]
        cap = int(ctx[L.T_LIMIT])
        if row["fg"] >= 0:
            prev = int(ctx[self.S + row["last_real"]])
            cap = min(cap, self.t[prev] + row["fg"])
        return cap

    def accepts(self, ctx, lvl: int, e: int) -> bool:
        row = self.rows[lvl]
        M = self.M
        s, d = self.src[e], self.dst[e]
        if row["unew"]:
            for k in row["neq_u"]:
                if ctx[M + k] == s:
                    return False
            if row["ulab"] >= 0 and (self.vlab[s] if self.vlab else 0) != row["ulab"]:
                return False
            ctx[M + row["us"]] = s
        elif ctx[M + row["us"]] != s:
            return False
        if row["vnew"]:
            for k in row["neq_v"]:
                if ctx[M + k] == d:
                    return False
            if row["vlab"] >= 0 and (self.vlab[d] if self.vlab else 0) != row["vlab"]:
                return False
        elif ctx[M + row["vs"]] != d:
            return False
        if row["elab"] >= 0 and (self.elab[e] if self.elab else 0) != row["elab"]:
            return False
        return True

    def find_next_match(self, ctx) -> int:
        lvl = int(ctx[L.LEVEL])
        bi, ei = self.B + lvl, self.E + lvl
        b, end = int(ctx[bi]), int(ctx[ei])
        cap = self.cap(ctx, lvl) if lvl > 0 else None
        floor = int(ctx[self.S + self.rows[lvl]["last_real"]]) if lvl > 0 else -1
        adj, t = self.adj, self.t
        it = 0
        found = -1
        while b < end:
            e = adj[b]
            b += 1
            it += 1
            if cap is not None:
                if t[e] > cap:
                    b = end
                    break
                if e <= floor:
                    continue
            if self.accepts(ctx, lvl, e):
                found = e
                break
        ctx[bi] = b
        ctx[L.ITERS] += it
        return found

    def check_anti(self, ctx, lvl: int) -> bool:
        """True when an edge between the mapped endpoints lies in the anti window."""
        row = self.rows[lvl]
        x = int(ctx[self.M + row["us"]])
        y = int(ctx[self.M + row["vs"]])
        ta = self.t[int(ctx[self.S + row["attach"]])]
        hi_t = ta + row["window"]
        n = self.n
        olo, ohi = self.out_ptr[x], self.out_ptr[x + 1]
        ilo, ihi = n + self.in_ptr[y], n + self.in_ptr[y + 1]
        if ohi - olo < ihi - ilo:
            lo, end = olo, ohi
        else:
            lo, end = ilo, ihi
        adj, t, src, dst = self.adj, self.t, self.src, self.dst
        hi = end
        while lo < hi:  # first position with t >= ta
            mid = (lo + hi) // 2
            if t[adj[mid]] < ta:
                lo = mid + 1
            else:
                hi = mid
        ctx[L.BSEARCH] += 1
        p = lo
        while p < end:
            e = adj[p]
            if t[e] > hi_t:
                break
            if src[e] == x and dst[e] == y:
                return True
            p += 1
        return False

    def init_level(self, ctx, lvl: int) -> None:
        """Position ``lvl``'s candidate range by binary search (only ever called on descent)."""
        row = self.rows[lvl]
        n = self.n
        prev = int(ctx[self.S + row["last_real"]])
        cap = self.cap(ctx, lvl)
        src = row["source"]
        if src == Source.OUT:
            x = int(ctx[self.M + row["us"]])
            lo, hi = self.out_ptr[x], self.out_ptr[x + 1]
        elif src == Source.IN:
            y = int(ctx[self.M + row["vs"]])
            lo, hi = n + self.in_ptr[y], n + self.in_ptr[y + 1]
        elif src == Source.BOTH:
            x = int(ctx[self.M + row["us"]])
            y = int(ctx[self.M + row["vs"]])
            if self.out_ptr[x + 1] - self.out_ptr[x] < self.in_ptr[y + 1] - self.in_ptr[y]:
                lo, hi = self.out_ptr[x], self.out_ptr[x + 1]
            else:
                lo, hi = n + self.in_ptr[y], n + self.in_ptr[y + 1]
        else:
            lo, hi = 2 * n + prev + 1, 3 * n
        adj, t = self.adj, self.t
        a, b = lo, hi
        while a < b:  # first entry later than the previous real edge
            mid = (a + b) // 2
            if adj[mid] <= prev:
                a = mid + 1
            else:
                b = mid
        lo = a
        b = hi
        while a < b:  # one past the last entry within the time cap
            mid = (a + b) // 2
            if t[adj[mid]] <= cap:
                a = mid + 1
            else:
                b = mid
        ctx[L.BSEARCH] += 2
        ctx[self.B + lvl] = lo
        ctx[self.E + lvl] = a

    def descend(self, ctx, e: int, out=None) -> int:
        lvl = int(ctx[L.LEVEL])
        row = self.rows[lvl]
        ctx[self.S + lvl] = e
        if row["unew"]:
            ctx[self.M + row["us"]] = self.src[e]
        if row["vnew"]:
            ctx[self.M + row["vs"]] = self.dst[e]
        if lvl == 0:
            ctx[L.T_LIMIT] = self.t[e] + self.cg
        nxt = lvl + 1
        while nxt < self.n_levels and self.rows[nxt]["kind"] == Kind.ANTI:
            if self.check_anti(ctx, nxt):
                return L.PRUNED
            nxt += 1
        if nxt == self.n_levels:
            if out is not None:
                fill = int(ctx[L.OUT_FILL])
                for j, rl in enumerate(self.real_levels):
                    out[fill, j] = ctx[self.S + rl]
                ctx[L.OUT_FILL] = fill + 1
            ctx[L.EMITTED] += 1
            return L.EMIT
        self.init_level(ctx, nxt)
        ctx[L.LEVEL] = nxt
        return L.DESCENDED

    def backtrack(self, ctx) -> bool:
        """Step back to the previous real level; True when the root level is exhausted."""
        lvl = int(ctx[L.LEVEL])
        if lvl == 0:
            return True
        ctx[L.LEVEL] = self.rows[lvl]["last_real"]
        ctx[L.ITERS] += 1
        return False

    # ------------------------------------------------------------------ driver

    def run(self, ctx, ctrl, max_iters: int, signal_interval: int, out=None) -> int:
        start = int(ctx[L.ITERS])
        cap_rows = out.shape[0] if out is not None else 0
        while True:
            it = int(ctx[L.ITERS])
            if it - start >= max_iters:
                return L.PAUSED
            if ctrl[L.CTRL_STEAL] and it > ctx[L.STEAL_MIN]:
                return L.STEAL
            if it >= ctx[L.NEXT_SIG]:
                ctx[L.NEXT_SIG] = it + signal_interval
                if ctrl[L.CTRL_ABORT]:
                    ctrl[L.CTRL_ABORT] = 0
                    return L.SIGNAL
            if out is not None and ctx[L.OUT_FILL] >= cap_rows:
                return L.FULL
            e = self.find_next_match(ctx)
            if e < 0:
                if self.backtrack(ctx):
                    return L.DONE
                continue
            self.descend(ctx, e, out)
