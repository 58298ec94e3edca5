"""Index-based similarity search.

For ``p = ceil(|q| * S)``, every size-``p`` ordered sub-sequence of the query
is probed: the posting lists of its keys are intersected (shortest first)
and each surviving candidate not yet in the result is checked with the
greedy order scan. The result set equals the exhaustive LCSS scan.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .embeddings import EmbeddingTable
from .index import ContextualIndex, OnePIndex, TwoPIndex, build_1p, build_2p, build_contextual
from .lcss import EXACT, MatchFn, baseline_ids
from .model import QuerySpec, SearchMode, Trajectory, TrajectoryCorpus, as_poi_array, required_common_pois


@dataclass(frozen=True)
class Combination:
    positions: tuple[int, ...]
    pois: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class SearchResult:
    ids: np.ndarray
    combinations: int = 0
    candidates_tested: int = 0
    candidates_passed: int = 0
    wall_time: float = 0.0

    @property
    def matched(self) -> set[int]:
        return set(self.ids.tolist())

    def __len__(self) -> int:
        return int(self.ids.shape[0])


def combinations(q: Trajectory | Sequence[int], p: int, distinct: bool = False) -> Iterator[Combination]:
    """Lazily yield the size-``p`` position combinations of ``q``.

    With ``distinct=True`` only the first combination of each distinct POI
    sub-sequence is yielded (the one that embeds leftmost in ``q``).
    """
    qa = as_poi_array(q).tolist()
    if not 1 <= p <= len(qa):
        raise ValueError(f"combination size must be in [1, {len(qa)}], got {p}")
    seen: set[tuple[int, ...]] = set()
    for pos in itertools.combinations(range(len(qa)), p):
        pois = tuple(qa[i] for i in pos)
        if distinct:
            if pois in seen:
                continue
            seen.add(pois)
        yield Combination(pos, pois)


def same_order(c: Trajectory | Sequence[int], combi: Combination | Sequence[int], match: MatchFn = EXACT) -> bool:
    """Greedy left-to-right check that ``combi`` embeds in ``c`` under ``match``."""
    pois = combi.pois if isinstance(combi, Combination) else combi
    ca = as_poi_array(c) if len(c) else np.zeros(0, dtype=np.int32)
    return bool(kernels.active.same_order(ca, as_poi_array(pois), *match.kernel_args))


def _result(ids, counters, start) -> SearchResult:
    return SearchResult(ids, int(counters[0]), int(counters[1]), int(counters[2]), time.perf_counter() - start)


def search_1p(corpus: TrajectoryCorpus, index: OnePIndex, q, threshold_s: float) -> SearchResult:
    start = time.perf_counter()
    qa = as_poi_array(q)
    p = required_common_pois(qa.shape[0], threshold_s)
    ids, counters = kernels.active.search_single(qa, p, index.offsets, index.ids, corpus.offsets,
                                                 corpus.pois, *EXACT.kernel_args)
    return _result(ids, counters, start)


def search_2p(corpus: TrajectoryCorpus, index: TwoPIndex, q, threshold_s: float,
              single: OnePIndex | None = None) -> SearchResult:
    """Pair-index search; ``p = 1`` falls back to the single-POI index.

    Without ``single`` the fallback index is built from ``corpus`` once and
    cached on ``index``.
    """
    start = time.perf_counter()
    qa = as_poi_array(q)
    p = required_common_pois(qa.shape[0], threshold_s)
    if p == 1:
        if single is None:
            single = getattr(index, "_fallback_1p", None)
            if single is None:
                single = build_1p(corpus)
                index._fallback_1p = single
        res = search_1p(corpus, single, qa, threshold_s)
        return SearchResult(res.ids, res.combinations, res.candidates_tested, res.candidates_passed,
                            time.perf_counter() - start)
    ids, counters = kernels.active.search_pairs(qa, p, index.n_pois, index.keys, index.lookup_table,
                                                index.offsets, index.ids,
                                                corpus.offsets, corpus.pois)
    return _result(ids, counters, start)


def search_contextual(corpus: TrajectoryCorpus, index: ContextualIndex, table: EmbeddingTable, q,
                      threshold_s: float, epsilon: float) -> SearchResult:
    if not -1.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [-1, 1], got {epsilon}")
    if epsilon != index.epsilon:
        raise ValueError(f"index was built for epsilon={index.epsilon}, query asks for {epsilon}")
    match = index.bind(table)
    start = time.perf_counter()
    qa = as_poi_array(q)
    p = required_common_pois(qa.shape[0], threshold_s)
    ids, counters = kernels.active.search_single(qa, p, index.offsets, index.ids, corpus.offsets,
                                                 corpus.pois, *match.kernel_args)
    return _result(ids, counters, start)


def search_baseline(corpus: TrajectoryCorpus, q, threshold_s: float, match: MatchFn = EXACT) -> SearchResult:
    """The exhaustive scan wrapped in a :class:`SearchResult`."""
    start = time.perf_counter()
    ids = baseline_ids(corpus, q, threshold_s, match)
    n = len(corpus)
    return SearchResult(ids, 0, n, int(ids.shape[0]), time.perf_counter() - start)


class SearchEngine:
    """Holds a corpus and whichever indexes have been built, and runs queries."""

    def __init__(self, corpus: TrajectoryCorpus, table: EmbeddingTable | None = None):
        self.corpus = corpus
        self.table = table
        self.one_p: OnePIndex | None = None
        self.two_p: TwoPIndex | None = None
        self.contextual: dict[float, ContextualIndex] = {}
        self._eps_match: dict[float, MatchFn] = {}

    def single(self) -> OnePIndex:
        if self.one_p is None:
            self.one_p = build_1p(self.corpus)
        return self.one_p

    def pairs(self) -> TwoPIndex:
        if self.two_p is None:
            self.two_p = build_2p(self.corpus)
        return self.two_p

    def contextual_index(self, epsilon: float) -> ContextualIndex:
        if self.table is None:
            raise ValueError("contextual search needs an embedding table")
        if epsilon not in self.contextual:
            self.contextual[epsilon] = build_contextual(self.corpus, self.table, epsilon, self.single())
        return self.contextual[epsilon]

    def epsilon_match(self, epsilon: float) -> MatchFn:
        if epsilon not in self._eps_match:
            self._eps_match[epsilon] = self.contextual_index(epsilon).bind(self.table)
        return self._eps_match[epsilon]

    def drop_contextual(self, epsilon: float) -> None:
        """Release the cached index and relation for one epsilon."""
        self.contextual.pop(epsilon, None)
        self._eps_match.pop(epsilon, None)

    def prepare(self, spec: QuerySpec) -> None:
        """Build whatever the query needs so that :meth:`run` times only the search."""
        if spec.mode is SearchMode.INDEX_1P:
            self.single()
        elif spec.mode is SearchMode.INDEX_2P:
            self.pairs()
            self.single()
        elif spec.mode is SearchMode.INDEX_CONTEXTUAL or spec.epsilon is not None:
            self.epsilon_match(spec.epsilon)

    def run(self, spec: QuerySpec) -> SearchResult:
        self.prepare(spec)
        q = spec.query
        if spec.mode is SearchMode.BASELINE:
            match = EXACT if spec.epsilon is None else self.epsilon_match(spec.epsilon)
            return search_baseline(self.corpus, q, spec.threshold_s, match)
        if spec.mode is SearchMode.INDEX_1P:
            return search_1p(self.corpus, self.single(), q, spec.threshold_s)
        if spec.mode is SearchMode.INDEX_2P:
            return search_2p(self.corpus, self.pairs(), q, spec.threshold_s, self.single())
        return search_contextual(self.corpus, self.contextual_index(spec.epsilon), self.table, q,
                                 spec.threshold_s, spec.epsilon)
