# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled search kernel. Same API and semantics as ``tempest._pykernel.Kernel``."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int32_t, int64_t

from tempest import _layout as _L
from tempest.plan import (C_ATTACH, C_ELABEL, C_FG, C_KIND, C_LAST_REAL, C_NEQ_U, C_NEQ_V,
                          C_SOURCE, C_ULABEL, C_UNEW, C_USLOT, C_VLABEL, C_VNEW, C_VSLOT, C_WINDOW)

cnp.import_array()

DEF HDR_LEVEL = 0
DEF HDR_T_LIMIT = 1
DEF HDR_ITERS = 2
DEF HDR_EMITTED = 3
DEF HDR_BSEARCH = 4
DEF HDR_BSEARCH_BT = 5
DEF HDR_OUT_FILL = 6
DEF HDR_NEXT_SIG = 7
DEF HDR_STEAL_MIN = 8
DEF HEADER = 9

DEF ST_DONE = 0
DEF ST_PAUSED = 1
DEF ST_STEAL = 2
DEF ST_SIGNAL = 3
DEF ST_FULL = 4

DEF R_DESCENDED = 0
DEF R_EMIT = 1
DEF R_PRUNED = 2

DEF SRC_OUT = 0
DEF SRC_IN = 1
DEF SRC_BOTH = 2

assert _L.HEADER == HEADER and _L.DONE == ST_DONE and _L.FULL == ST_FULL and _L.EMIT == R_EMIT


cdef class Kernel:
    cdef readonly object graph, plan
    cdef readonly int n_slots, n_levels, n_real
    cdef readonly str backend
    cdef int64_t n, cg
    cdef int M, B, E, S, size
    cdef const int32_t[::1] src, dst, elab, vlab, adj
    cdef const int64_t[::1] t, out_ptr, in_ptr
    cdef int has_elab, has_vlab
    # plan columns, one array per field
    cdef int64_t[::1] kind, us, vs, unew, vnew, source, neq_u, neq_v, fg, last_real, attach, window
    cdef int64_t[::1] ulab, vlab_req, elab_req, real_levels

    def __init__(self, graph, plan):
        self.graph = graph
        self.plan = plan
        self.backend = "cython"
        self.n = graph.n_edges
        self.cg = plan.cg_delta
        self.src = graph.src
        self.dst = graph.dst
        self.t = graph.t
        self.adj = graph.adj
        self.out_ptr = graph.out_ptr
        self.in_ptr = graph.in_ptr
        self.has_elab = graph.edge_labels is not None
        self.has_vlab = graph.vertex_labels is not None
        dummy = np.zeros(1, dtype=np.int32)
        self.elab = graph.edge_labels if self.has_elab else dummy
        self.vlab = graph.vertex_labels if self.has_vlab else dummy
        tab = np.ascontiguousarray(plan.table)
        col = lambda c: np.array(tab[:, c], dtype=np.int64)  # writable copy; the plan table is frozen
        self.kind, self.us, self.vs = col(C_KIND), col(C_USLOT), col(C_VSLOT)
        self.unew, self.vnew, self.source = col(C_UNEW), col(C_VNEW), col(C_SOURCE)
        self.neq_u, self.neq_v, self.fg = col(C_NEQ_U), col(C_NEQ_V), col(C_FG)
        self.last_real, self.attach, self.window = col(C_LAST_REAL), col(C_ATTACH), col(C_WINDOW)
        self.ulab, self.vlab_req, self.elab_req = col(C_ULABEL), col(C_VLABEL), col(C_ELABEL)
        self.real_levels = np.asarray(plan.real_levels, dtype=np.int64)
        self.n_levels = plan.n_levels
        self.n_slots = plan.n_motif_vertices
        self.n_real = len(plan.real_levels)
        self.M, self.B, self.E, self.S, self.size = _L.offsets(self.n_slots, self.n_levels)

    def new_context(self, int64_t root_lo, int64_t root_hi, int64_t signal_interval=1024,
                    int64_t steal_after=20):
        ctx = np.zeros(self.size, dtype=np.int64)
        ctx[self.M:self.M + self.n_slots] = -1
        ctx[self.B] = 2 * self.n + root_lo
        ctx[self.E] = 2 * self.n + root_hi
        ctx[HDR_NEXT_SIG] = signal_interval
        ctx[HDR_STEAL_MIN] = steal_after
        return ctx

    # ------------------------------------------------------------------ nogil core

    cdef inline int64_t _cap(self, int64_t[::1] ctx, int lvl) nogil:
        cdef int64_t cap = ctx[HDR_T_LIMIT]
        cdef int64_t f = self.fg[lvl]
        cdef int64_t c2
        if f >= 0:
            c2 = self.t[ctx[self.S + self.last_real[lvl]]] + f
            if c2 < cap:
                cap = c2
        return cap

    cdef inline bint _accepts(self, int64_t[::1] ctx, int lvl, int64_t e) nogil:
        cdef int64_t s = self.src[e]
        cdef int64_t d = self.dst[e]
        cdef int64_t mask
        cdef int k
        cdef int M = self.M
        if self.unew[lvl]:
            mask = self.neq_u[lvl]
            k = 0
            while mask:
                if (mask & 1) and ctx[M + k] == s:
                    return False
                mask >>= 1
                k += 1
            if self.ulab[lvl] >= 0 and (self.vlab[s] if self.has_vlab else 0) != self.ulab[lvl]:
                return False
            ctx[M + self.us[lvl]] = s
        elif ctx[M + self.us[lvl]] != s:
            return False
        if self.vnew[lvl]:
            mask = self.neq_v[lvl]
            k = 0
            while mask:
                if (mask & 1) and ctx[M + k] == d:
                    return False
                mask >>= 1
                k += 1
            if self.vlab_req[lvl] >= 0 and (self.vlab[d] if self.has_vlab else 0) != self.vlab_req[lvl]:
                return False
        elif ctx[M + self.vs[lvl]] != d:
            return False
        if self.elab_req[lvl] >= 0 and (self.elab[e] if self.has_elab else 0) != self.elab_req[lvl]:
            return False
        return True

    cdef int64_t _find(self, int64_t[::1] ctx) nogil:
        cdef int lvl = <int>ctx[HDR_LEVEL]
        cdef int64_t b = ctx[self.B + lvl]
        cdef int64_t end = ctx[self.E + lvl]
        cdef int64_t cap = 0, floor = -1, e, it = 0, found = -1
        cdef bint bounded = lvl > 0
        if bounded:
            cap = self._cap(ctx, lvl)
            floor = ctx[self.S + self.last_real[lvl]]
        while b < end:
            e = self.adj[b]
            b += 1
            it += 1
            if bounded:
                if self.t[e] > cap:
                    b = end
                    break
                if e <= floor:
                    continue
            if self._accepts(ctx, lvl, e):
                found = e
                break
        ctx[self.B + lvl] = b
        ctx[HDR_ITERS] += it
        return found

    cdef bint _anti(self, int64_t[::1] ctx, int lvl) nogil:
        cdef int64_t x = ctx[self.M + self.us[lvl]]
        cdef int64_t y = ctx[self.M + self.vs[lvl]]
        cdef int64_t ta = self.t[ctx[self.S + self.attach[lvl]]]
        cdef int64_t hi_t = ta + self.window[lvl]
        cdef int64_t olo = self.out_ptr[x], ohi = self.out_ptr[x + 1]
        cdef int64_t ilo = self.n + self.in_ptr[y], ihi = self.n + self.in_ptr[y + 1]
        cdef int64_t lo, hi, end, mid, p, e
        if ohi - olo < ihi - ilo:
            lo = olo
            end = ohi
        else:
            lo = ilo
            end = ihi
        hi = end
        while lo < hi:
            mid = (lo + hi) >> 1
            if self.t[self.adj[mid]] < ta:
                lo = mid + 1
            else:
                hi = mid
        ctx[HDR_BSEARCH] += 1
        p = lo
        while p < end:
            e = self.adj[p]
            if self.t[e] > hi_t:
                break
            if self.src[e] == x and self.dst[e] == y:
                return True
            p += 1
        return False

    cdef void _init_level(self, int64_t[::1] ctx, int lvl) nogil:
        cdef int64_t n = self.n
        cdef int64_t prev = ctx[self.S + self.last_real[lvl]]
        cdef int64_t cap = self._cap(ctx, lvl)
        cdef int64_t src = self.source[lvl]
        cdef int64_t x, y, lo, hi, a, b, mid
        if src == SRC_OUT:
            x = ctx[self.M + self.us[lvl]]
            lo = self.out_ptr[x]
            hi = self.out_ptr[x + 1]
        elif src == SRC_IN:
            y = ctx[self.M + self.vs[lvl]]
            lo = n + self.in_ptr[y]
            hi = n + self.in_ptr[y + 1]
        elif src == SRC_BOTH:
            x = ctx[self.M + self.us[lvl]]
            y = ctx[self.M + self.vs[lvl]]
            if self.out_ptr[x + 1] - self.out_ptr[x] < self.in_ptr[y + 1] - self.in_ptr[y]:
                lo = self.out_ptr[x]
                hi = self.out_ptr[x + 1]
            else:
                lo = n + self.in_ptr[y]
                hi = n + self.in_ptr[y + 1]
        else:
            lo = 2 * n + prev + 1
            hi = 3 * n
        a = lo
        b = hi
        while a < b:
            mid = (a + b) >> 1
            if self.adj[mid] <= prev:
                a = mid + 1
            else:
                b = mid
        lo = a
        b = hi
        while a < b:
            mid = (a + b) >> 1
            if self.t[self.adj[mid]] <= cap:
                a = mid + 1
            else:
                b = mid
        ctx[HDR_BSEARCH] += 2
        ctx[self.B + lvl] = lo
        ctx[self.E + lvl] = a

    cdef int _descend(self, int64_t[::1] ctx, int64_t e, int64_t[:, ::1] out, bint collect) nogil:
        cdef int lvl = <int>ctx[HDR_LEVEL]
        cdef int nxt, j
        cdef int64_t fill
        ctx[self.S + lvl] = e
        if self.unew[lvl]:
            ctx[self.M + self.us[lvl]] = self.src[e]
        if self.vnew[lvl]:
            ctx[self.M + self.vs[lvl]] = self.dst[e]
        if lvl == 0:
            ctx[HDR_T_LIMIT] = self.t[e] + self.cg
        nxt = lvl + 1
        while nxt < self.n_levels and self.kind[nxt] == 1:
            if self._anti(ctx, nxt):
                return R_PRUNED
            nxt += 1
        if nxt == self.n_levels:
            if collect:
                fill = ctx[HDR_OUT_FILL]
                for j in range(self.n_real):
                    out[fill, j] = ctx[self.S + self.real_levels[j]]
                ctx[HDR_OUT_FILL] = fill + 1
            ctx[HDR_EMITTED] += 1
            return R_EMIT
        self._init_level(ctx, nxt)
        ctx[HDR_LEVEL] = nxt
        return R_DESCENDED

    cdef inline bint _backtrack(self, int64_t[::1] ctx) nogil:
        cdef int lvl = <int>ctx[HDR_LEVEL]
        if lvl == 0:
            return True
        ctx[HDR_LEVEL] = self.last_real[lvl]
        ctx[HDR_ITERS] += 1
        return False

    cdef int _run(self, int64_t[::1] ctx, int64_t[::1] ctrl, int64_t max_iters,
                  int64_t signal_interval, int64_t[:, ::1] out, bint collect) nogil:
        cdef int64_t start = ctx[HDR_ITERS]
        cdef int64_t it, e
        cdef int64_t cap_rows = out.shape[0] if collect else 0
        while True:
            it = ctx[HDR_ITERS]
            if it - start >= max_iters:
                return ST_PAUSED
            if ctrl[0] and it > ctx[HDR_STEAL_MIN]:
                return ST_STEAL
            if it >= ctx[HDR_NEXT_SIG]:
                ctx[HDR_NEXT_SIG] = it + signal_interval
                if ctrl[1]:
                    ctrl[1] = 0
                    return ST_SIGNAL
            if collect and ctx[HDR_OUT_FILL] >= cap_rows:
                return ST_FULL
            e = self._find(ctx)
            if e < 0:
                if self._backtrack(ctx):
                    return ST_DONE
                continue
            self._descend(ctx, e, out, collect)

    # ------------------------------------------------------------------ Python API

    def run(self, int64_t[::1] ctx, int64_t[::1] ctrl, int64_t max_iters, int64_t signal_interval,
            out=None):
        cdef int64_t[:, ::1] buf
        cdef bint collect = out is not None
        cdef int status
        if collect:
            buf = out
        else:
            buf = np.empty((0, 0), dtype=np.int64)
        with nogil:
            status = self._run(ctx, ctrl, max_iters, signal_interval, buf, collect)
        return status

    def find_next_match(self, int64_t[::1] ctx):
        return self._find(ctx)

    def descend(self, int64_t[::1] ctx, int64_t e, out=None):
        cdef int64_t[:, ::1] buf
        cdef bint collect = out is not None
        buf = out if collect else np.empty((0, 0), dtype=np.int64)
        return self._descend(ctx, e, buf, collect)

    def backtrack(self, int64_t[::1] ctx):
        return self._backtrack(ctx)

    def check_anti(self, int64_t[::1] ctx, int lvl):
        return self._anti(ctx, lvl)

    def init_level(self, int64_t[::1] ctx, int lvl):
        self._init_level(ctx, lvl)

    def cap(self, int64_t[::1] ctx, int lvl):
        return self._cap(ctx, lvl)
