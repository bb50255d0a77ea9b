"""Command-line driver: mine, oracle, convert, partition inspect, plan dump, model."""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__
from .graph import GraphFormatError, TemporalGraph, attach_vertex_labels, load_edge_list, save_binary, save_text
from .oracle import OracleTooLarge, brute_force_mine
from .partition import build_partitions, describe
from .perfmodel import intra_warp_speedup, residual_tail_fraction, tail_fraction_from_work, tail_speedup
from .plan import compile_plan, dump_plan
from .query import MotifQuery, QueryError, load_query, parse_duration, query_from_json
from .runtime import SchedulerConfig, default_workers, run_query

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2

# query-file runtime_params key -> SchedulerConfig field
_RUNTIME_MAP = {
    "workers": "workers",
    "partitions": "partitions",
    "steal_after": "steal_after_iters",
    "signal_interval": "signal_check_interval",
    "root_chunk": "root_chunk",
    "canonical": "canonical",
}


class _Usage(Exception):
    pass


def _load_query(args) -> tuple[MotifQuery, str | None]:
    if args.query_json:
        with open(args.query_json) as fh:
            return query_from_json(fh.read()), os.path.dirname(os.path.abspath(args.query_json))
    return load_query(args.query), os.path.dirname(os.path.abspath(args.query))


def _load_graph(path: str, vertex_labels: str | None) -> TemporalGraph:
    g = load_edge_list(path)
    if vertex_labels:
        g = attach_vertex_labels(g, vertex_labels)
    return g


def _inputs(args):
    """Resolve ``[GRAPH] QUERY`` positionals, falling back to the query's ``in_graph``."""
    paths = args.paths
    if args.query_json:
        if len(paths) > 1:
            raise _Usage("with --query-json give at most one positional (the graph)")
        args.query = None
        graph_path = paths[0] if paths else None
    else:
        if not 1 <= len(paths) <= 2:
            raise _Usage("expected [GRAPH] QUERY")
        args.query = paths[-1]
        graph_path = paths[0] if len(paths) == 2 else None
    q, qdir = _load_query(args)
    if graph_path is None:
        if not q.in_graph:
            raise _Usage("no graph given and the query has no in_graph")
        graph_path = q.in_graph if os.path.isabs(q.in_graph) else os.path.join(qdir, q.in_graph)
    return _load_graph(graph_path, args.vertex_labels), q


def _config(args, q: MotifQuery) -> SchedulerConfig:
    cfg = SchedulerConfig(workers=default_workers())
    for key, attr in _RUNTIME_MAP.items():
        if key in q.runtime:
            setattr(cfg, attr, q.runtime[key])
    if "abort_timeout_ms" in q.runtime:
        cfg.abort_timeout = q.runtime["abort_timeout_ms"] / 1000.0
    for flag, attr in (("workers", "workers"), ("partitions", "partitions"), ("steal_after", "steal_after_iters"),
                       ("signal_interval", "signal_check_interval"), ("root_chunk", "root_chunk"),
                       ("backend", "backend")):
        v = getattr(args, flag)
        if v is not None:
            setattr(cfg, attr, v)
    if args.abort_timeout_ms is not None:
        cfg.abort_timeout = args.abort_timeout_ms / 1000.0
    if args.canonical:
        cfg.canonical = True
    cfg.steal = not args.no_steal
    cfg.redistribute = not args.no_redistribute
    if args.enumerate is not None:
        cfg.max_enumeration = args.enumerate
    cfg.validate()
    return cfg


def _print_matches(graph: TemporalGraph, matches, resolve: bool, out) -> None:
    for m in matches:
        if resolve:
            out.write(" ".join("({},{},{})".format(*graph.resolve(e)) for e in m) + "\n")
        else:
            out.write(" ".join(map(str, m)) + "\n")


def cmd_mine(args) -> int:
    graph, q = _inputs(args)
    cfg = _config(args, q)
    limit = args.enumerate
    if limit is None and q.enumerate:
        limit = q.max_matches or cfg.max_enumeration
    res = run_query(graph, q, cfg, enumerate_limit=limit)
    if res.matches is not None:
        _print_matches(graph, res.matches, args.resolve, sys.stdout)
        if res.truncated:
            print(f"# truncated: {len(res.matches)} of {res.total}", file=sys.stderr)
    else:
        print(f"count: {res.total}")
    if args.stats:
        print(res.stats.to_json(indent=2), file=sys.stderr)
    return EXIT_OK


def cmd_oracle(args) -> int:
    graph, q = _inputs(args)
    matches = brute_force_mine(graph, q, force=args.force, guard=args.guard)
    if args.enumerate is not None:
        _print_matches(graph, matches[:args.enumerate], args.resolve, sys.stdout)
    else:
        print(f"count: {len(matches)}")
    return EXIT_OK


def cmd_convert(args) -> int:
    g = _load_graph(args.input, args.vertex_labels)
    fmt = args.to
    if fmt == "auto":
        fmt = "binary" if args.output.endswith((".bin", ".tmpg")) else "text"
    if fmt == "binary":
        save_binary(g, args.output)
    else:
        save_text(g, args.output)
    print(f"wrote {args.output}: {g.n_vertices} vertices, {g.n_edges} edges ({fmt})")
    return EXIT_OK


def cmd_partition(args) -> int:
    g = load_edge_list(args.graph)
    if args.delta is not None:
        delta = parse_duration(args.delta)
    elif args.query:
        delta = load_query(args.query).closure_delta()
    else:
        raise _Usage("give --delta or --query")
    print(describe(build_partitions(g, args.partitions, delta), g))
    return EXIT_OK


def cmd_plan(args) -> int:
    print(dump_plan(compile_plan(load_query(args.query))))
    return EXIT_OK


def cmd_model(args) -> int:
    f = args.formula
    if f == "intra-warp":
        val = intra_warp_speedup(args.t_imb, args.k, args.eps, args.i_opt)
    elif f == "tail-speedup":
        val = tail_speedup(args.o, args.phi, args.l_imb, args.kc_over_t)
    elif f == "residual-tail":
        val = residual_tail_fraction(args.l_imb, args.theta)
    else:
        val = tail_fraction_from_work(args.work_fraction, args.phi)
    print(f"{f}: {val:.6g}")
    return EXIT_OK


def _mining_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("paths", nargs="+", metavar="[GRAPH] QUERY",
                   help="graph file (optional when the query names in_graph) and query file")
    p.add_argument("--query-json", metavar="PATH", help="read the query from a JSON document instead")
    p.add_argument("--vertex-labels", metavar="PATH", help="'vertex_id label' lines to attach (default: none)")
    p.add_argument("--enumerate", type=int, metavar="N", help="print up to N matches instead of the count")
    p.add_argument("--resolve", action="store_true", help="print matches as (src,dst,t) triples")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tempest", description=__doc__)
    ap.add_argument("--version", action="version", version=f"tempest {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = ap.add_subparsers(dest="cmd", required=True)

    m = sub.add_parser("mine", help="count or enumerate matches")
    _mining_flags(m)
    m.add_argument("--workers", type=int, help="worker threads (default: $TEMPEST_WORKERS or CPU count)")
    m.add_argument("--partitions", type=int, help="chronological partitions / executor groups (default: 1)")
    m.add_argument("--steal-after", type=int, help="iterations before a task honours steal requests (default: 20)")
    m.add_argument("--signal-interval", type=int,
                   help="iterations between redistribution-signal checks (default: 1024)")
    m.add_argument("--abort-timeout-ms", type=float, help="grace period before a signalled task dumps (default: 100)")
    m.add_argument("--root-chunk", type=int, help="root edges per initial task (default: 4096)")
    m.add_argument("--canonical", action="store_true", help="collect all matches and sort before truncating")
    m.add_argument("--no-steal", action="store_true", help="disable steal requests")
    m.add_argument("--no-redistribute", action="store_true", help="disable tail redistribution")
    m.add_argument("--backend", choices=["cython", "python"], help="kernel backend (default: cython when built)")
    m.add_argument("--stats", action="store_true", help="write the JSON stats report to stderr")
    m.set_defaults(func=cmd_mine)

    o = sub.add_parser("oracle", help="brute-force reference count (small graphs)")
    _mining_flags(o)
    o.add_argument("--force", action="store_true", help="ignore the edge-count guard")
    o.add_argument("--guard", type=int, default=2000, help="maximum edges without --force (default: 2000)")
    o.set_defaults(func=cmd_oracle)

    c = sub.add_parser("convert", help="convert between text and binary graph formats")
    c.add_argument("input")
    c.add_argument("output")
    c.add_argument("--to", choices=["auto", "text", "binary"], default="auto",
                   help="output format (default: auto, binary for .bin/.tmpg)")
    c.add_argument("--vertex-labels", metavar="PATH", help="attach vertex labels before writing")
    c.set_defaults(func=cmd_convert)

    pt = sub.add_parser("partition", help="partition tools")
    psub = pt.add_subparsers(dest="action", required=True)
    pi = psub.add_parser("inspect", help="print partition ranges and the closure check")
    pi.add_argument("graph")
    pi.add_argument("--partitions", "-n", type=int, default=2, help="major partitions (default: 2)")
    pi.add_argument("--delta", help="time reach as a duration, e.g. 1d")
    pi.add_argument("--query", help="take the time reach from a query file")
    pi.set_defaults(func=cmd_partition)

    pl = sub.add_parser("plan", help="plan tools")
    plsub = pl.add_subparsers(dest="action", required=True)
    pd = plsub.add_parser("dump", help="print the compiled per-level table")
    pd.add_argument("query")
    pd.set_defaults(func=cmd_plan)

    md = sub.add_parser("model", help="evaluate a load-balancing model formula")
    md.add_argument("formula", choices=["intra-warp", "tail-speedup", "residual-tail", "tail-fraction"])
    md.add_argument("--t-imb", type=float, default=1.0, help="active threads in the baseline (default: 1)")
    md.add_argument("--k", type=float, default=0.0, help="optimisation trigger count (default: 0)")
    md.add_argument("--eps", type=float, default=0.0, help="per-trigger overhead (default: 0)")
    md.add_argument("--i-opt", type=float, default=1.0, help="optimised iteration count (default: 1)")
    md.add_argument("--o", type=float, default=1.0, help="signal-monitoring overhead factor (default: 1)")
    md.add_argument("--phi", type=float, default=336.0, help="core groups (default: 336)")
    md.add_argument("--l-imb", type=float, default=0.5, help="tail fraction (default: 0.5)")
    md.add_argument("--kc-over-t", type=float, default=0.0, help="respawn cost term (default: 0)")
    md.add_argument("--theta", type=float, default=2.0, help="tail stealing benefit ratio (default: 2)")
    md.add_argument("--work-fraction", type=float, default=0.01, help="heaviest warp's work share (default: 0.01)")
    md.set_defaults(func=cmd_model)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except QueryError as exc:
        if exc.diagnostics:
            print("error: invalid query", file=sys.stderr)
            for d in exc.diagnostics:
                print(f"  {d}", file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (GraphFormatError, OracleTooLarge, _Usage, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
