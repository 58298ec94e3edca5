"""numba kernels against the pure-numpy fallback on the same workloads.

Each task runs once to warm up (JIT compile), then best-of-``--repeat``
wall time is kept. Results are compared across backends so a speedup is
never reported for diverging output.

    python3 benchmarks/bench_backends.py --trajectories 5000 -o backends.csv
"""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from trajsearch import kernels
from trajsearch.embeddings import train_skipgram
from trajsearch.index import build_1p, build_2p
from trajsearch.lcss import EXACT
from trajsearch.search import search_1p, search_2p, search_baseline
from trajsearch.synthetic import zipf_corpus


def _tasks(corpus, queries, threshold):
    i1, i2 = build_1p(corpus), build_2p(corpus)
    rng = np.random.default_rng(0)
    pairs = [(corpus[int(a)].pois, corpus[int(a)].pois[rng.permutation(len(corpus[int(a)]))[:3]])
             for a in rng.integers(0, len(corpus), 2000)]

    def order_checks():
        k = kernels.active
        return [bool(k.same_order(c, combi, *EXACT.kernel_args)) for c, combi in pairs]

    return {
        "baseline": lambda: [search_baseline(corpus, q, threshold).ids.tolist() for q in queries],
        "index-1p": lambda: [search_1p(corpus, i1, q, threshold).ids.tolist() for q in queries],
        "index-2p": lambda: [search_2p(corpus, i2, q, threshold, i1).ids.tolist() for q in queries],
        "same_order x2000": order_checks,
        "skipgram 1 epoch": lambda: train_skipgram(corpus, epochs=1, seed=1,
                                                   kernel_module=kernels.active).vectors,
    }


def _time(fn, repeat):
    out = fn()
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def _same(a, b):
    if isinstance(a, np.ndarray):
        return np.allclose(a, b, rtol=1e-9, atol=1e-12)
    return a == b


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trajectories", type=int, default=5000)
    ap.add_argument("--pois", type=int, default=1500)
    ap.add_argument("--queries", type=int, default=50)
    ap.add_argument("--threshold", "-S", type=float, default=0.5)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("-o", "--output", help="CSV path (default: table on stdout only)")
    args = ap.parse_args(argv)

    try:
        kernels.load("numba")
    except ImportError:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1

    corpus = zipf_corpus(args.trajectories, args.pois, seed=args.seed)
    rng = np.random.default_rng(args.seed + 1)
    picks = rng.choice(np.flatnonzero(corpus.lengths <= 12), args.queries, replace=False)
    queries = [corpus[int(t)].pois for t in picks]

    saved = kernels.active
    timings, outputs = {}, {}
    try:
        for name in ("numba", "numpy"):
            kernels.active = kernels.load(name)
            for task, fn in _tasks(corpus, queries, args.threshold).items():
                timings[task, name], outputs[task, name] = _time(fn, args.repeat)
    finally:
        kernels.active = saved

    rows = []
    for task in dict.fromkeys(t for t, _ in timings):
        nb, npy = timings[task, "numba"], timings[task, "numpy"]
        rows.append({"task": task, "numba_s": f"{nb:.6f}", "numpy_s": f"{npy:.6f}",
                     "speedup": f"{npy / nb:.1f}", "agree": _same(outputs[task, "numba"], outputs[task, "numpy"])})

    print(f"{len(corpus)} trajectories, {corpus.n_pois} POIs, {len(queries)} queries, S={args.threshold}")
    print(f"{'task':<18}{'numba s':>12}{'numpy s':>12}{'speedup':>9}  agree")
    for r in rows:
        print(f"{r['task']:<18}{r['numba_s']:>12}{r['numpy_s']:>12}{r['speedup']:>9}  {r['agree']}")
    if args.output:
        with open(args.output, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0 if all(r["agree"] for r in rows) else 2


if __name__ == "__main__":
    sys.exit(main())
