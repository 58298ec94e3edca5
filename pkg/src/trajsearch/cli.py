"""Command-line frontend.

Exit codes: 0 success, 1 usage error, 2 data error, 3 ``--verify`` mismatch.
Path flags fall back to ``TRAJSEARCH_CORPUS``, ``TRAJSEARCH_INDEX`` and
``TRAJSEARCH_VECTORS``.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, kernels
from .embeddings import EmbeddingError, EmbeddingTable, load_vectors, save_vectors, train_skipgram
from .index import ContextualIndex, OnePIndex, PostingIndex, TwoPIndex, build_1p, build_2p, \
    build_contextual, load_index, save_index, stats
from .ingest import IngestConfig, IngestError, ingest_file
from .lcss import EXACT, baseline_ids
from .model import QuerySpec, SearchMode, TrajectoryCorpus, UNKNOWN_POI
from .search import SearchEngine, SearchResult
from .snapshot import SnapshotError, load_corpus, save_corpus

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MISMATCH = 0, 1, 2, 3
ENV_CORPUS, ENV_INDEX, ENV_VECTORS = "TRAJSEARCH_CORPUS", "TRAJSEARCH_INDEX", "TRAJSEARCH_VECTORS"
DEFAULT_EPSILONS = (0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0)


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class BenchRow:
    query_id: int
    query_len: int
    threshold_s: float
    mode: str
    epsilon: float | None
    result_count: int
    wall_time: float | None
    combinations_enumerated: int
    candidates_tested: int


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def _path(value: str | None, env: str, what: str, required: bool = True) -> Path | None:
    value = value or os.environ.get(env)
    if not value:
        if required:
            raise UsageError(f"{what} path required (flag or ${env})")
        return None
    return Path(value)


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _load_corpus(args) -> TrajectoryCorpus:
    corpus = load_corpus(_path(args.corpus, ENV_CORPUS, "corpus"))
    if len(corpus) == 0:
        raise DataError("corpus is empty")
    return corpus


def _load_table(args, required: bool) -> EmbeddingTable | None:
    path = _path(getattr(args, "vectors", None), ENV_VECTORS, "vectors", required)
    return load_vectors(path) if path else None


def _check_index(index: PostingIndex, corpus: TrajectoryCorpus) -> None:
    if index.n_trajectories != len(corpus) or list(index.vocabulary) != list(corpus.vocabulary):
        raise DataError("index was not built from this corpus")


def _print_stats(index: PostingIndex, out=None) -> None:
    row = stats(index).as_row()
    out = out or sys.stdout
    print(f"kind: {index.kind}", file=out)
    for key, value in row.items():
        print(f"{key}: {value}", file=out)


def _write_csv(rows: Sequence[dict], path: str | None, header: Sequence[str]) -> None:
    fh = open(path, "w", newline="", encoding="utf-8") if path and path != "-" else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=list(header), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in r.items()})
    finally:
        if fh is not sys.stdout:
            fh.close()


# -- subcommands -----------------------------------------------------------

def cmd_ingest(args) -> int:
    config = IngestConfig(args.min_poi_visits, args.min_len, args.max_len)
    try:
        corpus, report = ingest_file(args.input, config, args.delimiter,
                                     (args.user_col, args.poi_col, args.time_col),
                                     args.time_format, args.header)
    except IngestError as exc:
        raise DataError(str(exc)) from exc
    save_corpus(corpus, args.output)
    text = report.to_json()
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    if len(corpus) == 0:
        _warn("ingest produced an empty corpus")
    return EXIT_OK


def cmd_build_index(args) -> int:
    corpus = _load_corpus(args)
    mode = SearchMode.parse(args.mode)
    if mode is SearchMode.BASELINE:
        raise UsageError("baseline has no index")
    if mode is SearchMode.INDEX_CONTEXTUAL:
        if args.epsilon is None:
            raise UsageError("contextual index needs --epsilon")
        table = _load_table(args, required=True)
        index = build_contextual(corpus, table, args.epsilon)
    elif mode is SearchMode.INDEX_2P:
        index = build_2p(corpus)
    else:
        index = build_1p(corpus)
    out = _path(args.output, ENV_INDEX, "index")
    save_index(index, out)
    _print_stats(index)
    return EXIT_OK


def cmd_train_embeddings(args) -> int:
    corpus = _load_corpus(args)
    table = train_skipgram(corpus, dim=args.dim, window=args.window, epochs=args.epochs,
                           negatives=args.negatives, seed=args.seed)
    out = _path(args.output, ENV_VECTORS, "vectors")
    save_vectors(table, out)
    print(f"wrote {len(table)} vectors of dim {table.dim} to {out}")
    return EXIT_OK


def _engine_for(args, corpus: TrajectoryCorpus, mode: SearchMode, epsilon: float | None) -> SearchEngine:
    needs_table = mode is SearchMode.INDEX_CONTEXTUAL or epsilon is not None
    table = _load_table(args, required=needs_table) if needs_table else None
    engine = SearchEngine(corpus, table)
    index_path = _path(getattr(args, "index", None), ENV_INDEX, "index", required=False)
    if index_path is not None and mode is not SearchMode.BASELINE:
        index = load_index(index_path)
        _check_index(index, corpus)
        if isinstance(index, ContextualIndex):
            if mode is not SearchMode.INDEX_CONTEXTUAL or index.epsilon != epsilon:
                raise UsageError(f"index is contextual (epsilon={index.epsilon}), query is {mode.value}")
            engine.contextual[index.epsilon] = index
        elif isinstance(index, TwoPIndex):
            if mode is not SearchMode.INDEX_2P:
                raise UsageError(f"index is 2p, query is {mode.value}")
            engine.two_p = index
        elif isinstance(index, OnePIndex):
            # also serves the 2p fallback for p = 1 and the contextual build
            engine.one_p = index
    return engine


def cmd_query(args) -> int:
    corpus = _load_corpus(args)
    mode = SearchMode.parse(args.mode)
    if mode is SearchMode.INDEX_CONTEXTUAL and args.epsilon is None:
        raise UsageError("contextual query needs --epsilon")
    if mode is not SearchMode.INDEX_CONTEXTUAL and mode is not SearchMode.BASELINE and args.epsilon is not None:
        raise UsageError(f"--epsilon only applies to contextual or baseline mode, not {mode.value}")
    q = corpus.encode(args.pois)
    for ext, poi in zip(args.pois, q.tolist()):
        if poi == UNKNOWN_POI:
            _warn(f"unknown POI {ext!r}; it matches nothing")
    spec = QuerySpec(q, args.threshold, mode, args.epsilon)
    engine = _engine_for(args, corpus, mode, args.epsilon)
    result = engine.run(spec)
    for tid in result.ids.tolist():
        print(tid)
    if args.verify:
        match = EXACT if args.epsilon is None else engine.epsilon_match(args.epsilon)
        expected = baseline_ids(corpus, q, args.threshold, match)
        if not np.array_equal(expected, result.ids):
            missing = sorted(set(expected.tolist()) - result.matched)
            extra = sorted(result.matched - set(expected.tolist()))
            print(f"verify: MISMATCH missing={missing} extra={extra}", file=sys.stderr)
            return EXIT_MISMATCH
        print(f"verify: ok ({len(expected)} results)", file=sys.stderr)
    return EXIT_OK


def _sample_queries(corpus: TrajectoryCorpus, sample: int | None, seed: int,
                    max_len: int | None = None) -> list[int]:
    ids = np.arange(len(corpus))
    if max_len is not None:
        ids = ids[corpus.lengths <= max_len]
    if sample is not None and sample < ids.shape[0]:
        rng = np.random.default_rng(seed)
        ids = np.sort(rng.choice(ids, size=sample, replace=False))
    return ids.tolist()


def _row(tid: int, corpus: TrajectoryCorpus, spec: QuerySpec, res: SearchResult, timed: bool) -> BenchRow:
    return BenchRow(tid, len(corpus[tid]), spec.threshold_s, spec.mode.value, spec.epsilon, len(res),
                    res.wall_time if timed else None, res.combinations, res.candidates_tested)


def aggregate(rows: Sequence[BenchRow]) -> list[dict]:
    """Mean and std of wall time per (mode, S, epsilon, query_len)."""
    groups: dict[tuple, list[BenchRow]] = {}
    for r in rows:
        groups.setdefault((r.mode, r.threshold_s, r.epsilon, r.query_len), []).append(r)
    out = []
    for (mode, s, eps, length), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1],
                                                                            -1 if kv[0][2] is None else kv[0][2],
                                                                            kv[0][3])):
        times = np.array([r.wall_time for r in rs if r.wall_time is not None], dtype=float)
        out.append({
            "mode": mode, "threshold_s": s, "epsilon": eps, "query_len": length, "queries": len(rs),
            "mean_wall_time": float(times.mean()) if times.size else None,
            "std_wall_time": float(times.std()) if times.size else None,
            "mean_result_count": float(np.mean([r.result_count for r in rs])),
        })
    return out


AGGREGATE_FIELDS = ("mode", "threshold_s", "epsilon", "query_len", "queries",
                    "mean_wall_time", "std_wall_time", "mean_result_count")


def run_bench(engine: SearchEngine, query_ids: Sequence[int], modes: Sequence[SearchMode],
              thresholds: Sequence[float], epsilon: float | None = None, jobs: int = 1) -> list[BenchRow]:
    """One row per query x mode x S; indexes are built before any timing.

    With ``jobs > 1`` queries run on a thread pool and ``wall_time`` is left
    empty, since concurrent timings are not comparable.
    """
    corpus = engine.corpus
    specs = []
    for mode in modes:
        eps = epsilon if mode is SearchMode.INDEX_CONTEXTUAL else None
        for s in thresholds:
            for tid in query_ids:
                specs.append((tid, QuerySpec(corpus[tid].pois, s, mode, eps)))
    seen = set()
    for _, spec in specs:
        key = (spec.mode, spec.epsilon)
        if key not in seen:
            # build indexes and get the kernels compiled before timing
            engine.prepare(spec)
            engine.run(spec)
            seen.add(key)
    if jobs <= 1:
        return [_row(tid, corpus, spec, engine.run(spec), True) for tid, spec in specs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(lambda item: engine.run(item[1]), specs))
    return [_row(tid, corpus, spec, res, False) for (tid, spec), res in zip(specs, results)]


def cmd_bench(args) -> int:
    corpus = _load_corpus(args)
    modes = [SearchMode.parse(m) for m in args.modes.split(",") if m.strip()]
    if not modes:
        raise UsageError("no modes given")
    if SearchMode.INDEX_CONTEXTUAL in modes and args.epsilon is None:
        raise UsageError("contextual mode needs --epsilon")
    table = _load_table(args, required=SearchMode.INDEX_CONTEXTUAL in modes)
    engine = SearchEngine(corpus, table)
    query_ids = _sample_queries(corpus, args.sample, args.seed, args.max_query_len)
    rows = run_bench(engine, query_ids, modes, args.threshold, args.epsilon, args.jobs)
    header = [f.name for f in fields(BenchRow)]
    _write_csv([asdict(r) for r in rows], args.output, header)
    if args.aggregate:
        _write_csv(aggregate(rows), args.aggregate, AGGREGATE_FIELDS)
    return EXIT_OK


SWEEP_FIELDS = ("epsilon", "queries", "mean_extra_pct", "mean_wall_time", "mean_neighborhood_size",
                "p50_neighborhood_size", "p90_neighborhood_size", "max_neighborhood_size",
                "mean_exact_results", "mean_contextual_results")


def epsilon_sweep(engine: SearchEngine, query_ids: Sequence[int], threshold_s: float,
                  epsilons: Sequence[float]) -> list[dict]:
    """Per epsilon: mean extra results over exact 1P, contextual time, neighbourhood sizes.

    The extra percentage of a query is ``100 * (|contextual| - |exact|) / |exact|``;
    queries with no exact result are left out of that mean.
    """
    corpus = engine.corpus
    exact = {}
    for tid in query_ids:
        exact[tid] = len(engine.run(QuerySpec(corpus[tid].pois, threshold_s, SearchMode.INDEX_1P)))
    out = []
    for eps in epsilons:
        index = engine.contextual_index(eps)
        sizes = index.neighborhood.sizes()
        present = np.unique(corpus.pois)
        sizes = sizes[present]
        extra, times, ctx_counts = [], [], []
        for tid in query_ids:
            res = engine.run(QuerySpec(corpus[tid].pois, threshold_s, SearchMode.INDEX_CONTEXTUAL, eps))
            times.append(res.wall_time)
            ctx_counts.append(len(res))
            if exact[tid]:
                extra.append(100.0 * (len(res) - exact[tid]) / exact[tid])
        out.append({
            "epsilon": eps, "queries": len(query_ids),
            "mean_extra_pct": float(np.mean(extra)) if extra else None,
            "mean_wall_time": float(np.mean(times)) if times else None,
            "mean_neighborhood_size": float(sizes.mean()),
            "p50_neighborhood_size": float(np.percentile(sizes, 50)),
            "p90_neighborhood_size": float(np.percentile(sizes, 90)),
            "max_neighborhood_size": int(sizes.max()),
            "mean_exact_results": float(np.mean(list(exact.values()))) if exact else None,
            "mean_contextual_results": float(np.mean(ctx_counts)) if ctx_counts else None,
        })
        engine.drop_contextual(eps)
    return out


def cmd_epsilon_sweep(args) -> int:
    corpus = _load_corpus(args)
    table = _load_table(args, required=True)
    engine = SearchEngine(corpus, table)
    query_ids = _sample_queries(corpus, args.sample, args.seed, args.max_query_len)
    rows = epsilon_sweep(engine, query_ids, args.threshold, args.epsilons)
    _write_csv(rows, args.output, SWEEP_FIELDS)
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trajsearch", description="Index-based trajectory similarity search.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({kernels.BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="check-in log -> corpus snapshot + report")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="corpus snapshot to write")
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--user-col", type=int, default=0)
    p.add_argument("--poi-col", type=int, default=1)
    p.add_argument("--time-col", type=int, default=2)
    p.add_argument("--time-format", help="strptime format; ISO 8601 when omitted")
    p.add_argument("--header", action="store_true", help="skip the first row")
    p.add_argument("--min-poi-visits", type=int, default=15, help="keep POIs with more visits than this")
    p.add_argument("--min-len", type=int, default=3)
    p.add_argument("--max-len", type=int, default=30)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-index", help="build and save a 1p/2p/contextual index")
    p.add_argument("--corpus")
    p.add_argument("--mode", default="1p", choices=["1p", "2p", "contextual"])
    p.add_argument("--vectors")
    p.add_argument("--epsilon", type=float)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("train-embeddings", help="train skip-gram POI vectors on the corpus")
    p.add_argument("--corpus")
    p.add_argument("-o", "--output")
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_train_embeddings)

    modes = [m.value for m in SearchMode] + ["1p", "2p", "contextual"]
    p = sub.add_parser("query", help="print ids of trajectories similar to a query")
    p.add_argument("pois", nargs="+", help="query POIs as external ids")
    p.add_argument("--corpus")
    p.add_argument("--index")
    p.add_argument("--vectors")
    p.add_argument("-S", "--threshold", type=float, default=0.5)
    p.add_argument("--mode", default="index-1p", choices=modes)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--verify", action="store_true", help="cross-check against the exhaustive scan")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="time queries per mode; CSV rows + per-size aggregate")
    p.add_argument("--corpus")
    p.add_argument("--vectors")
    p.add_argument("--modes", default="baseline,index-1p")
    p.add_argument("-S", "--threshold", type=_float_list, default=[0.5], help="comma-separated")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--sample", type=int, help="random sample of N corpus trajectories as queries")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-query-len", type=int)
    p.add_argument("--jobs", type=int, default=1, help="parallel workers; leaves wall_time empty")
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--aggregate")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("epsilon-sweep", help="extra results and neighbourhood sizes per epsilon")
    p.add_argument("--corpus")
    p.add_argument("--vectors")
    p.add_argument("-S", "--threshold", type=float, default=0.5)
    p.add_argument("--epsilons", type=_float_list, default=list(DEFAULT_EPSILONS))
    p.add_argument("--sample", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-query-len", type=int)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_epsilon_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"trajsearch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, IngestError, SnapshotError, EmbeddingError, OSError, ValueError) as exc:
        print(f"trajsearch: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
