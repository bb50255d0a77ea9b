"""Temporal graph storage: a time-sorted edge list plus CSR-style in/out indices.

Edges are totally ordered by ``(t, index)``; because the edge list itself is
sorted that way, comparing two edges under the total order is the same as
comparing their indices. Adjacency lists hold edge indices in ascending order.
"""
from __future__ import annotations

import gzip
import io
import logging
import os
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable

import numpy as np

log = logging.getLogger(__name__)

MAGIC = b"TMPG"
VERSION = 1
FLAG_VERTEX_LABELS = 1
FLAG_EDGE_LABELS = 2
FLAG_ORIGINAL_IDS = 4

_HEADER = struct.Struct("<4sIQQI")
_EDGE = np.dtype([("src", "<u4"), ("dst", "<u4"), ("t", "<u8")])
_EDGE_LABELED = np.dtype([("src", "<u4"), ("dst", "<u4"), ("t", "<u8"), ("label", "<u2")])


class GraphFormatError(ValueError):
    """Malformed graph or label input."""


def _build_index(keys: np.ndarray, n_vertices: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(keys, kind="stable").astype(np.int32)
    ptr = np.zeros(n_vertices + 1, dtype=np.int64)
    if len(keys):
        np.cumsum(np.bincount(keys, minlength=n_vertices), out=ptr[1:])
    return ptr, order


@dataclass(eq=False)
class TemporalGraph:
    src: np.ndarray
    dst: np.ndarray
    t: np.ndarray
    n_vertices: int
    edge_labels: np.ndarray | None = None
    vertex_labels: np.ndarray | None = None
    original_ids: np.ndarray | None = None
    out_ptr: np.ndarray = field(init=False, repr=False)
    out_idx: np.ndarray = field(init=False, repr=False)
    in_ptr: np.ndarray = field(init=False, repr=False)
    in_idx: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.src = np.ascontiguousarray(self.src, dtype=np.int32)
        self.dst = np.ascontiguousarray(self.dst, dtype=np.int32)
        self.t = np.ascontiguousarray(self.t, dtype=np.int64)
        if self.edge_labels is not None:
            self.edge_labels = np.ascontiguousarray(self.edge_labels, dtype=np.int32)
        if self.vertex_labels is not None:
            self.vertex_labels = np.ascontiguousarray(self.vertex_labels, dtype=np.int32)
        if len(self.t) > 1 and np.any(np.diff(self.t) < 0):
            raise GraphFormatError("edges must be sorted by timestamp")
        self.out_ptr, self.out_idx = _build_index(self.src, self.n_vertices)
        self.in_ptr, self.in_idx = _build_index(self.dst, self.n_vertices)
        self._adj = None

    @classmethod
    def from_edges(cls, edges: Iterable[tuple], n_vertices: int | None = None,
                   vertex_labels=None) -> "TemporalGraph":
        """Build from ``(src, dst, t[, label])`` tuples with dense vertex ids.

        Edges are stably sorted by timestamp; no id densification happens here.
        """
        rows = [tuple(e) for e in edges]
        labeled = any(len(r) > 3 for r in rows)
        src = np.array([r[0] for r in rows], dtype=np.int64)
        dst = np.array([r[1] for r in rows], dtype=np.int64)
        t = np.array([r[2] for r in rows], dtype=np.int64)
        lab = np.array([r[3] if len(r) > 3 else 0 for r in rows], dtype=np.int64) if labeled else None
        if n_vertices is None:
            n_vertices = int(max(src.max(initial=-1), dst.max(initial=-1)) + 1)
        order = np.argsort(t, kind="stable")
        return cls(src[order], dst[order], t[order], n_vertices,
                   edge_labels=None if lab is None else lab[order],
                   vertex_labels=None if vertex_labels is None else np.asarray(vertex_labels))

    @property
    def n_edges(self) -> int:
        return len(self.t)

    def out_edges(self, v: int) -> np.ndarray:
        return self.out_idx[self.out_ptr[v]:self.out_ptr[v + 1]]

    def in_edges(self, v: int) -> np.ndarray:
        return self.in_idx[self.in_ptr[v]:self.in_ptr[v + 1]]

    def edge(self, e: int) -> tuple[int, int, int]:
        return int(self.src[e]), int(self.dst[e]), int(self.t[e])

    def edge_label(self, e: int) -> int:
        return 0 if self.edge_labels is None else int(self.edge_labels[e])

    def vertex_label(self, v: int) -> int:
        return 0 if self.vertex_labels is None else int(self.vertex_labels[v])

    @property
    def adj(self) -> np.ndarray:
        """Concatenated candidate lists: ``[out_idx | in_idx | 0..n_edges)``.

        Candidate ranges in search contexts are absolute positions into this array.
        """
        if self._adj is None:
            self._adj = np.concatenate(
                [self.out_idx, self.in_idx, np.arange(self.n_edges, dtype=np.int32)]
            ).astype(np.int32, copy=False)
        return self._adj

    def resolve(self, e: int) -> tuple[int, int, int]:
        """Edge ``e`` as ``(src, dst, t)`` using original vertex ids."""
        s, d, t = self.edge(e)
        if self.original_ids is not None:
            s, d = int(self.original_ids[s]), int(self.original_ids[d])
        return s, d, t

    def slice(self, lo: int, hi: int) -> "TemporalGraph":
        """Sub-graph over edges ``[lo, hi)``; edge ``i`` of the slice is edge ``lo + i`` here."""
        return TemporalGraph(
            self.src[lo:hi], self.dst[lo:hi], self.t[lo:hi], self.n_vertices,
            edge_labels=None if self.edge_labels is None else self.edge_labels[lo:hi],
            vertex_labels=self.vertex_labels, original_ids=self.original_ids,
        )

    def equals(self, other: "TemporalGraph") -> bool:
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(a, b)

        return (self.n_vertices == other.n_vertices
                and np.array_equal(self.src, other.src)
                and np.array_equal(self.dst, other.dst)
                and np.array_equal(self.t, other.t)
                and same(self.edge_labels, other.edge_labels)
                and same(self.vertex_labels, other.vertex_labels))

    def __repr__(self):
        return f"TemporalGraph(n_vertices={self.n_vertices}, n_edges={self.n_edges})"


# --------------------------------------------------------------------------- search

def lower_bound_after(lst, times, t_exclusive, idx_tiebreak) -> int:
    """First position in ``lst`` whose edge is strictly later than ``(t_exclusive, idx_tiebreak)``.

    ``lst`` holds edge indices ascending under ``(times[e], e)``.
    """
    lo, hi = 0, len(lst)
    while lo < hi:
        mid = (lo + hi) // 2
        e = lst[mid]
        te = times[e]
        if te < t_exclusive or (te == t_exclusive and e <= idx_tiebreak):
            lo = mid + 1
        else:
            hi = mid
    return lo


def upper_bound_within(lst, times, t_inclusive, lo=0, hi=None) -> int:
    """One past the last position in ``lst[lo:hi]`` whose timestamp is ``<= t_inclusive``."""
    if hi is None:
        hi = len(lst)
    while lo < hi:
        mid = (lo + hi) // 2
        if times[lst[mid]] <= t_inclusive:
            lo = mid + 1
        else:
            hi = mid
    return lo


# --------------------------------------------------------------------------- I/O

def _open_text(source) -> io.TextIOBase:
    if isinstance(source, (str, os.PathLike)):
        path = os.fspath(source)
        if path.endswith(".gz"):
            return gzip.open(path, "rt")
        return open(path, "r")
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode())
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source)


def _parse_text_lines(fh) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray | None]:
    src, dst, ts, labels = [], [], [], []
    any_label = False
    for lineno, line in enumerate(fh, 1):
        body = line.split("#", 1)[0].split()
        if not body:
            continue
        if len(body) not in (3, 4):
            raise GraphFormatError(f"line {lineno}: expected 'src dst t [label]', got {line.strip()!r}")
        try:
            vals = [int(x) for x in body]
        except ValueError:
            raise GraphFormatError(f"line {lineno}: non-integer field in {line.strip()!r}") from None
        if vals[0] < 0 or vals[1] < 0:
            raise GraphFormatError(f"line {lineno}: negative vertex id")
        if vals[2] < 0:
            raise GraphFormatError(f"line {lineno}: negative timestamp {vals[2]}")
        src.append(vals[0])
        dst.append(vals[1])
        ts.append(vals[2])
        if len(vals) == 4:
            any_label = True
            labels.append(vals[3])
        else:
            labels.append(0)
    return (np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
            np.array(ts, dtype=np.int64), np.array(labels, dtype=np.int64) if any_label else None)


def _read_text_fast(path: str):
    """pandas fast path for large files; returns None to fall back to the checked parser."""
    try:
        import pandas as pd
    except ImportError:  # pragma: no cover
        return None
    try:
        df = pd.read_csv(path, sep=r"\s+", header=None, comment="#", dtype=np.int64,
                         engine="c", compression="infer")
    except Exception:
        return None
    if df.shape[1] not in (3, 4) or df.isnull().values.any():
        return None
    cols = [df[c].to_numpy() for c in df.columns]
    if (cols[0] < 0).any() or (cols[1] < 0).any() or (cols[2] < 0).any():
        return None
    return cols[0], cols[1], cols[2], (cols[3] if len(cols) == 4 else None)


def _assemble(src, dst, ts, labels) -> TemporalGraph:
    if len(ts) == 0:
        return TemporalGraph(src, dst, ts, 0)
    ids, inverse = np.unique(np.concatenate([src, dst]), return_inverse=True)
    n = len(src)
    dsrc, ddst = inverse[:n], inverse[n:]
    order = np.argsort(ts, kind="stable")
    return TemporalGraph(dsrc[order], ddst[order], ts[order], len(ids),
                         edge_labels=None if labels is None else labels[order],
                         original_ids=ids.astype(np.int64))


def load_edge_list(source, format: str = "auto") -> TemporalGraph:
    """Load a temporal edge list from a path, bytes, or stream.

    Text format is one ``src dst t [label]`` edge per line (``#`` starts a
    comment); vertex ids are densified and the original ids kept in
    ``original_ids``. Paths ending in ``.gz`` are decompressed. Binary files
    are recognised by their ``TMPG`` magic.
    """
    if format == "auto":
        format = _sniff(source)
    if format == "binary":
        return load_binary(source)
    if format != "text":
        raise ValueError(f"unknown graph format {format!r}")
    if isinstance(source, (str, os.PathLike)) and os.path.getsize(source) > (1 << 22):
        fast = _read_text_fast(os.fspath(source))
        if fast is not None:
            return _assemble(*fast)
    with _open_text(source) as fh:
        return _assemble(*_parse_text_lines(fh))


def _sniff(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return "binary" if bytes(source[:4]) == MAGIC else "text"
    if isinstance(source, (str, os.PathLike)):
        path = os.fspath(source)
        if path.endswith(".gz"):
            return "text"
        with open(path, "rb") as fh:
            return "binary" if fh.read(4) == MAGIC else "text"
    return "text"


def attach_vertex_labels(graph: TemporalGraph, source, by_original_id: bool = True) -> TemporalGraph:
    """Attach ``vertex_id label`` lines; unlisted vertices get label 0.

    Ids are interpreted as original ids when the graph carries an id map.
    Duplicate assignments keep the last one and log a warning.
    """
    if graph.original_ids is not None and by_original_id:
        lookup = {int(o): i for i, o in enumerate(graph.original_ids)}
    else:
        lookup = None
    labels = np.zeros(graph.n_vertices, dtype=np.int32)
    seen = set()
    with _open_text(source) as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.split("#", 1)[0].split()
            if not body:
                continue
            if len(body) != 2:
                raise GraphFormatError(f"line {lineno}: expected 'vertex_id label'")
            try:
                vid, lab = int(body[0]), int(body[1])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: non-integer field") from None
            dense = lookup.get(vid) if lookup is not None else vid
            if dense is None or not (0 <= dense < graph.n_vertices):
                raise GraphFormatError(f"line {lineno}: unknown vertex id {vid}")
            if dense in seen:
                log.warning("vertex %d labelled more than once; keeping last label", vid)
            seen.add(dense)
            labels[dense] = lab
    out = TemporalGraph(graph.src, graph.dst, graph.t, graph.n_vertices,
                        edge_labels=graph.edge_labels, vertex_labels=labels,
                        original_ids=graph.original_ids)
    return out


def save_binary(graph: TemporalGraph, dest) -> None:
    flags = 0
    if graph.vertex_labels is not None:
        flags |= FLAG_VERTEX_LABELS
    if graph.edge_labels is not None:
        flags |= FLAG_EDGE_LABELS
    if graph.original_ids is not None:
        flags |= FLAG_ORIGINAL_IDS
    rec = np.empty(graph.n_edges, dtype=_EDGE_LABELED if graph.edge_labels is not None else _EDGE)
    rec["src"] = graph.src
    rec["dst"] = graph.dst
    rec["t"] = graph.t
    if graph.edge_labels is not None:
        rec["label"] = graph.edge_labels
    own = isinstance(dest, (str, os.PathLike))
    fh: BinaryIO = open(dest, "wb") if own else dest
    try:
        fh.write(_HEADER.pack(MAGIC, VERSION, graph.n_vertices, graph.n_edges, flags))
        fh.write(rec.tobytes())
        if graph.vertex_labels is not None:
            fh.write(graph.vertex_labels.astype("<u2").tobytes())
        if graph.original_ids is not None:
            fh.write(graph.original_ids.astype("<u8").tobytes())
    finally:
        if own:
            fh.close()


def load_binary(source) -> TemporalGraph:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
    if len(data) < _HEADER.size:
        raise GraphFormatError("truncated binary header")
    magic, version, n_v, n_e, flags = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise GraphFormatError("bad magic; not a TMPG file")
    if version != VERSION:
        raise GraphFormatError(f"unsupported binary version {version}")
    dt = _EDGE_LABELED if flags & FLAG_EDGE_LABELS else _EDGE
    off = _HEADER.size
    need = off + n_e * dt.itemsize
    if len(data) < need:
        raise GraphFormatError("truncated edge section")
    rec = np.frombuffer(data, dtype=dt, count=n_e, offset=off)
    off = need
    vlabels = ids = None
    if flags & FLAG_VERTEX_LABELS:
        vlabels = np.frombuffer(data, dtype="<u2", count=n_v, offset=off).astype(np.int32)
        off += 2 * n_v
    if flags & FLAG_ORIGINAL_IDS:
        ids = np.frombuffer(data, dtype="<u8", count=n_v, offset=off).astype(np.int64)
    return TemporalGraph(rec["src"].astype(np.int32), rec["dst"].astype(np.int32),
                         rec["t"].astype(np.int64), int(n_v),
                         edge_labels=rec["label"].astype(np.int32) if flags & FLAG_EDGE_LABELS else None,
                         vertex_labels=vlabels, original_ids=ids)


def save_text(graph: TemporalGraph, dest) -> None:
    """Write ``src dst t [label]`` lines using original vertex ids when known."""
    ids = graph.original_ids
    src = ids[graph.src] if ids is not None else graph.src
    dst = ids[graph.dst] if ids is not None else graph.dst
    cols = [src, dst, graph.t]
    if graph.edge_labels is not None:
        cols.append(graph.edge_labels)
    arr = np.column_stack(cols).astype(np.int64) if graph.n_edges else np.empty((0, len(cols)), np.int64)
    if isinstance(dest, (str, os.PathLike)) and os.fspath(dest).endswith(".gz"):
        with gzip.open(dest, "wt") as fh:
            np.savetxt(fh, arr, fmt="%d")
    else:
        np.savetxt(dest, arr, fmt="%d")
