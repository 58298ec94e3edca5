"""Inverted trajectory indexes: single POI, ordered POI pair, contextual.

Each index is a CSR table: key ``k`` owns the ascending, duplicate-free
trajectory ids ``ids[offsets[k]:offsets[k+1]]``. The single-POI and
contextual indexes are dense over POI ids; the pair index keeps only the
keys that occur, encoded as ``first * n_pois + second``.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .embeddings import EmbeddingTable, Neighborhood, neighborhoods
from .lcss import MatchFn
from .model import OFFSET_DTYPE, POI_DTYPE, TrajectoryCorpus
from .snapshot import (
    Reader,
    SnapshotError,
    Writer,
    check_header,
    delta_decode,
    delta_encode,
    varint_decode,
    varint_encode,
)

INDEX_MAGIC = b"TRJSIDX\x00"
INDEX_VERSION = 1
_KIND_CODES = {"1p": 1, "2p": 2, "contextual": 3}
_NO_DIGEST = b"\x00" * 32

ID_DTYPE = np.int32


@dataclass(frozen=True)
class IndexStats:
    entry_count: int
    mean_list_length: float
    std_list_length: float
    build_time: float

    def as_row(self) -> dict:
        return {
            "entries": self.entry_count,
            "avg_trajectories": round(self.mean_list_length, 4),
            "std_trajectories": round(self.std_list_length, 4),
            "build_time_ms": round(self.build_time * 1000.0, 3),
        }


class PostingIndex:
    kind = ""

    def __init__(self, keys: np.ndarray, offsets: np.ndarray, ids: np.ndarray,
                 n_trajectories: int, vocabulary: tuple[str, ...]):
        self.keys = np.ascontiguousarray(keys, dtype=np.int64)
        self.offsets = np.ascontiguousarray(offsets, dtype=OFFSET_DTYPE)
        self.ids = np.ascontiguousarray(ids, dtype=ID_DTYPE)
        for a in (self.keys, self.offsets, self.ids):
            a.setflags(write=False)
        self.n_trajectories = int(n_trajectories)
        self.vocabulary = tuple(vocabulary)
        self.build_time = 0.0

    @property
    def n_pois(self) -> int:
        return len(self.vocabulary)

    def list_lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    def _row(self, key: int) -> int:
        raise NotImplementedError

    def _posting(self, row: int) -> np.ndarray:
        if row < 0:
            return self.ids[:0]
        return self.ids[self.offsets[row]:self.offsets[row + 1]]

    def items(self):
        for row in np.flatnonzero(self.list_lengths()).tolist():
            yield self._key_of(row), self._posting(row)

    def _key_of(self, row: int):
        return int(self.keys[row])

    def as_dict(self) -> dict:
        return {k: v.tolist() for k, v in self.items()}

    def __len__(self) -> int:
        return int(np.count_nonzero(self.list_lengths()))

    def __eq__(self, other) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return (self.vocabulary == other.vocabulary and self.n_trajectories == other.n_trajectories
                and np.array_equal(self.keys, other.keys) and np.array_equal(self.offsets, other.offsets)
                and np.array_equal(self.ids, other.ids) and self._extra_eq(other))

    def _extra_eq(self, other) -> bool:
        return True


class _DenseIndex(PostingIndex):
    """Key ``k`` is POI id ``k``; rows cover the whole vocabulary."""

    def _row(self, key: int) -> int:
        return key if 0 <= key < self.offsets.shape[0] - 1 else -1

    def __getitem__(self, poi: int) -> np.ndarray:
        return self._posting(self._row(int(poi)))

    def __contains__(self, poi: int) -> bool:
        return self[poi].shape[0] > 0


class OnePIndex(_DenseIndex):
    """POI -> trajectories passing through it."""

    kind = "1p"


class ContextualIndex(_DenseIndex):
    """POI -> trajectories passing through some epsilon-similar POI."""

    kind = "contextual"

    def __init__(self, *args, epsilon: float, table_digest: bytes, neighborhood: Neighborhood | None = None):
        super().__init__(*args)
        self.epsilon = float(epsilon)
        self.table_digest = bytes(table_digest)
        self.neighborhood = neighborhood

    def _extra_eq(self, other) -> bool:
        return self.epsilon == other.epsilon and self.table_digest == other.table_digest

    def bind(self, table: EmbeddingTable) -> MatchFn:
        """Match relation for order checks; verifies the table is the build table."""
        if table.digest() != self.table_digest:
            raise ValueError("embedding table differs from the one this index was built with")
        if self.neighborhood is None:
            self.neighborhood = neighborhoods(table, self.vocabulary, self.epsilon)
        return self.neighborhood.to_match()


class TwoPIndex(PostingIndex):
    """Ordered POI pair -> trajectories visiting the first POI before the second."""

    kind = "2p"

    @property
    def lookup_table(self) -> np.ndarray:
        """Hash table over ``keys`` for the active kernels, built on first use."""
        # keyed by kernel module: the numpy kernels need no table at all
        cache = self.__dict__.setdefault("_lookup_tables", {})
        mod = kernels.active
        if mod.__name__ not in cache:
            cache[mod.__name__] = mod.build_pair_table(self.keys)
        return cache[mod.__name__]

    def pair_key(self, first: int, second: int) -> int:
        return int(first) * self.n_pois + int(second)

    def _row(self, key: int) -> int:
        r = int(np.searchsorted(self.keys, key))
        return r if r < self.keys.shape[0] and self.keys[r] == key else -1

    def __getitem__(self, pair: tuple[int, int]) -> np.ndarray:
        a, b = pair
        if not (0 <= a < self.n_pois and 0 <= b < self.n_pois):
            return self.ids[:0]
        return self._posting(self._row(self.pair_key(a, b)))

    def __contains__(self, pair) -> bool:
        return self[pair].shape[0] > 0

    def _key_of(self, row: int):
        k = int(self.keys[row])
        return divmod(k, self.n_pois)


def _csr_from_pairs(keys: np.ndarray, tids: np.ndarray, n_rows: int | None):
    """Group (key, tid) pairs into CSR with sorted, distinct ids per key."""
    order = np.lexsort((tids, keys))
    keys, tids = keys[order], tids[order]
    if keys.shape[0]:
        keep = np.ones(keys.shape[0], dtype=bool)
        keep[1:] = (keys[1:] != keys[:-1]) | (tids[1:] != tids[:-1])
        keys, tids = keys[keep], tids[keep]
    if n_rows is None:
        uniq, counts = np.unique(keys, return_counts=True)
    else:
        uniq = np.arange(n_rows, dtype=np.int64)
        counts = np.bincount(keys, minlength=n_rows) if keys.shape[0] else np.zeros(n_rows, np.int64)
    offsets = np.zeros(uniq.shape[0] + 1, dtype=OFFSET_DTYPE)
    np.cumsum(counts, out=offsets[1:])
    return uniq, offsets, tids


def _trajectory_ids(corpus: TrajectoryCorpus) -> np.ndarray:
    return np.repeat(np.arange(len(corpus), dtype=ID_DTYPE), corpus.lengths)


def build_1p(corpus: TrajectoryCorpus) -> OnePIndex:
    start = time.perf_counter()
    keys, offsets, ids = _csr_from_pairs(corpus.pois.astype(np.int64), _trajectory_ids(corpus), corpus.n_pois)
    index = OnePIndex(keys, offsets, ids, len(corpus), corpus.vocabulary)
    index.build_time = time.perf_counter() - start
    return index


def _ordered_pairs(corpus: TrajectoryCorpus) -> tuple[np.ndarray, np.ndarray]:
    """All (t[a], t[b]) with a < b for every trajectory, as pair keys + ids."""
    lengths = corpus.lengths
    n_pois = corpus.n_pois
    key_parts, tid_parts = [], []
    for length in np.unique(lengths).tolist():
        if length < 2:
            continue
        tids = np.flatnonzero(lengths == length).astype(ID_DTYPE)
        rows = corpus.offsets[tids][:, None] + np.arange(length)[None, :]
        seqs = corpus.pois[rows].astype(np.int64)
        first, second = np.triu_indices(length, 1)
        key_parts.append((seqs[:, first] * n_pois + seqs[:, second]).reshape(-1))
        tid_parts.append(np.repeat(tids, first.shape[0]))
    if not key_parts:
        return np.zeros(0, np.int64), np.zeros(0, ID_DTYPE)
    return np.concatenate(key_parts), np.concatenate(tid_parts)


def build_2p(corpus: TrajectoryCorpus) -> TwoPIndex:
    start = time.perf_counter()
    keys, tids = _ordered_pairs(corpus)
    uniq, offsets, ids = _csr_from_pairs(keys, tids, None)
    index = TwoPIndex(uniq, offsets, ids, len(corpus), corpus.vocabulary)
    index.build_time = time.perf_counter() - start
    return index


def build_contextual(corpus: TrajectoryCorpus, table: EmbeddingTable, epsilon: float,
                     single: OnePIndex | None = None) -> ContextualIndex:
    """Union of single-POI lists over each POI's epsilon-neighbourhood."""
    start = time.perf_counter()
    if not -1.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [-1, 1], got {epsilon}")
    present = np.unique(corpus.pois)
    # only corpus POIs need vectors; others get an empty list
    vocab = list(corpus.vocabulary)
    table.rows_for([vocab[p] for p in present.tolist()])
    if present.shape[0] != len(vocab):
        keep = np.zeros(len(vocab), bool)
        keep[present] = True
        hood = _partial_neighborhood(table, vocab, keep, epsilon)
    else:
        hood = neighborhoods(table, vocab, epsilon)
    single = single or build_1p(corpus)
    counts = np.zeros(len(vocab), dtype=np.int64)
    parts = []
    # membership mask over trajectories: linear, and yields sorted ids
    seen = np.zeros(len(corpus), dtype=bool)
    for poi in range(len(vocab)):
        nb = hood.neighbors[hood.offsets[poi]:hood.offsets[poi + 1]]
        if nb.shape[0] == 0:
            continue
        if nb.shape[0] == 1:
            merged = single[int(nb[0])]
        else:
            seen[single.ids[_ranges(single.offsets[nb], single.offsets[nb + 1])]] = True
            merged = np.flatnonzero(seen).astype(ID_DTYPE)
            seen[merged] = False
        counts[poi] = merged.shape[0]
        parts.append(merged)
    offsets = np.zeros(len(vocab) + 1, dtype=OFFSET_DTYPE)
    np.cumsum(counts, out=offsets[1:])
    ids = np.concatenate(parts) if parts else np.zeros(0, ID_DTYPE)
    index = ContextualIndex(np.arange(len(vocab)), offsets, ids, len(corpus), corpus.vocabulary,
                            epsilon=epsilon, table_digest=table.digest(), neighborhood=hood)
    index.build_time = time.perf_counter() - start
    return index


def _ranges(starts: np.ndarray, stops: np.ndarray) -> np.ndarray:
    """Concatenation of ``arange(a, b)`` for each pair, without a Python loop."""
    lengths = stops - starts
    total = int(lengths.sum())
    if total == 0:
        return np.zeros(0, np.int64)
    # run-length trick: a ramp of ones with jumps at each range start
    step = np.ones(total, np.int64)
    nz = lengths > 0
    firsts = starts[nz].astype(np.int64)
    step[0] = firsts[0]
    ends = (stops[nz] - 1).astype(np.int64)
    step[np.cumsum(lengths[nz])[:-1]] = firsts[1:] - ends[:-1]
    return np.cumsum(step)


def _partial_neighborhood(table, vocab, keep, epsilon) -> Neighborhood:
    sub = [vocab[i] for i in np.flatnonzero(keep).tolist()]
    local = neighborhoods(table, sub, epsilon)
    back = np.flatnonzero(keep).astype(POI_DTYPE)
    counts = np.zeros(len(vocab), dtype=OFFSET_DTYPE)
    counts[keep] = local.sizes()
    offsets = np.zeros(len(vocab) + 1, dtype=OFFSET_DTYPE)
    np.cumsum(counts, out=offsets[1:])
    return Neighborhood(local.epsilon, offsets, back[local.neighbors], local.cosines)


def stats(index: PostingIndex) -> IndexStats:
    lengths = index.list_lengths()
    lengths = lengths[lengths > 0]
    if lengths.shape[0] == 0:
        return IndexStats(0, 0.0, 0.0, index.build_time)
    return IndexStats(int(lengths.shape[0]), float(lengths.mean()), float(lengths.std()), index.build_time)


def index_to_bytes(index: PostingIndex) -> bytes:
    buf = io.BytesIO()
    w = Writer(buf)
    buf.write(INDEX_MAGIC)
    w.pack("H", INDEX_VERSION)
    w.pack("B", _KIND_CODES[index.kind])
    w.pack("QQ", index.n_trajectories, index.n_pois)
    if isinstance(index, ContextualIndex):
        w.pack("d", index.epsilon)
        buf.write(index.table_digest)
    else:
        w.pack("d", math.nan)
        buf.write(_NO_DIGEST)
    w.strings(index.vocabulary)
    lengths = index.list_lengths()
    nz = np.flatnonzero(lengths)
    # key table: only non-empty keys are written
    w.pack("Q", nz.shape[0])
    w.blob(varint_encode(np.diff(index.keys[nz], prepend=0) if nz.shape[0] else nz))
    w.blob(varint_encode(lengths[nz]))
    w.pack("Q", index.ids.shape[0])
    w.blob(varint_encode(delta_encode(index.offsets, index.ids)))
    return buf.getvalue()


def index_from_bytes(data: bytes) -> PostingIndex:
    r = Reader(io.BytesIO(data))
    check_header(r, INDEX_MAGIC, INDEX_VERSION)
    (code,) = r.unpack("B")
    kinds = {v: k for k, v in _KIND_CODES.items()}
    if code not in kinds:
        raise SnapshotError(f"unknown index kind {code}")
    kind = kinds[code]
    n_traj, n_pois = r.unpack("QQ")
    (epsilon,) = r.unpack("d")
    digest = r.read(32)
    vocabulary = tuple(r.strings())
    if len(vocabulary) != n_pois:
        raise SnapshotError("vocabulary size does not match header")
    (n_entries,) = r.unpack("Q")
    keys = np.cumsum(varint_decode(r.blob(), n_entries).astype(np.int64))
    lengths = varint_decode(r.blob(), n_entries).astype(np.int64)
    (n_ids,) = r.unpack("Q")
    sparse_off = np.zeros(n_entries + 1, dtype=OFFSET_DTYPE)
    np.cumsum(lengths, out=sparse_off[1:])
    if sparse_off[-1] != n_ids:
        raise SnapshotError("posting lengths do not add up")
    ids = delta_decode(sparse_off, varint_decode(r.blob(), n_ids))
    r.expect_end()
    if kind == "2p":
        index = TwoPIndex(keys, sparse_off, ids, n_traj, vocabulary)
    else:
        dense = np.zeros(n_pois, dtype=np.int64)
        dense[keys] = lengths
        offsets = np.zeros(n_pois + 1, dtype=OFFSET_DTYPE)
        np.cumsum(dense, out=offsets[1:])
        args = (np.arange(n_pois), offsets, ids, n_traj, vocabulary)
        if kind == "1p":
            index = OnePIndex(*args)
        else:
            index = ContextualIndex(*args, epsilon=epsilon, table_digest=digest)
    return index


def save_index(index: PostingIndex, path: str | Path) -> None:
    Path(path).write_bytes(index_to_bytes(index))


def load_index(path: str | Path) -> PostingIndex:
    return index_from_bytes(Path(path).read_bytes())
