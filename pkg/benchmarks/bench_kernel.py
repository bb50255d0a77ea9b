"""Compare the compiled and pure-Python kernels on identical single-threaded workloads.

    python benchmarks/bench_kernel.py [--edges N] [--repeat R] [--json PATH]
"""
import argparse
import json
import time

import numpy as np

from tempest import parse_query
from tempest.engine import available_backends
from tempest.runtime import SchedulerConfig, run_query
from tempest.synth import hot_vertex_graph, random_graph

MOTIFS = {
    "triangle": "0 -> 1 @ 0\n  1 -> 2 @ 1\n  2 -> 0 @ 2",
    "path3": "0 -> 1 @ 0\n  1 -> 2 @ 1\n  2 -> 3 @ 2",
    "cycle4": "0 -> 1 @ 0\n  1 -> 2 @ 1\n  2 -> 3 @ 2\n  3 -> 0 @ 3",
    "star4-anti": "0 -> 1 @ 0\n  0 -> 2 @ 1\n  0 -> 3 @ 2\n  !1 -> 2 @ 3 attach=2 window=5",
}


def _time(graph, query, backend, repeat):
    cfg = SchedulerConfig(workers=1, backend=backend, steal=False, redistribute=False)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = run_query(graph, query, cfg)
        best = min(best, time.perf_counter() - t0)
    return best, out.total, out.stats.iterations


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--edges", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args()

    rng = np.random.default_rng(7)
    graphs = {
        "uniform": (random_graph(rng, 500, args.edges, args.edges // 4), 40),
        "hot-vertex": (hot_vertex_graph(rng, args.edges, 2_000), 20),
    }
    backends = available_backends()
    rows = []
    print(f"{'graph':<11} {'motif':<11} {'matches':>9} {'iters':>10} "
          + " ".join(f"{b + ' s':>10}" for b in backends) + "   speedup")
    for gname, (g, delta) in graphs.items():
        for mname, body in MOTIFS.items():
            q = parse_query(f"pattern:\n  {body}\nconstraints:\n  cg_delta = {delta}\n")
            res = {b: _time(g, q, b, args.repeat) for b in backends}
            counts = {r[1] for r in res.values()}
            assert len(counts) == 1, f"backends disagree on {gname}/{mname}: {res}"
            secs = {b: r[0] for b, r in res.items()}
            speed = secs["python"] / secs["cython"] if {"python", "cython"} <= secs.keys() else float("nan")
            total, iters = res[backends[0]][1:]
            print(f"{gname:<11} {mname:<11} {total:>9} {iters:>10} "
                  + " ".join(f"{secs[b]:>10.4f}" for b in backends) + f"   {speed:7.1f}x")
            rows.append({"graph": gname, "motif": mname, "matches": total, "iterations": iters,
                         "seconds": secs, "speedup": speed})
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
