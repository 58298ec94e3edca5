"""Core domain types: POI ids, trajectories, the corpus and query specs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Sequence

import numpy as np

PoiId = int
"""Dense integer POI token; ``-1`` marks a POI unknown to the corpus."""

POI_DTYPE = np.int32
OFFSET_DTYPE = np.int64
UNKNOWN_POI = -1


class SearchMode(str, Enum):
    BASELINE = "baseline"
    INDEX_1P = "index-1p"
    INDEX_2P = "index-2p"
    INDEX_CONTEXTUAL = "index-contextual"

    @classmethod
    def parse(cls, value: "str | SearchMode") -> "SearchMode":
        if isinstance(value, cls):
            return value
        aliases = {"1p": cls.INDEX_1P, "2p": cls.INDEX_2P, "contextual": cls.INDEX_CONTEXTUAL}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise ValueError(f"unknown search mode {value!r}") from None


def required_common_pois(query_len: int, threshold_s: float) -> int:
    """Minimum LCSS length for a trajectory to count as similar to the query.

    ``ceil(query_len * threshold_s)``, with the product rounded to 9 decimals
    first so that ``5 * 0.6`` gives 3 and not 4.
    """
    if query_len < 1:
        raise ValueError(f"query_len must be >= 1, got {query_len}")
    if not 0.0 < threshold_s <= 1.0:
        raise ValueError(f"threshold_s must be in (0, 1], got {threshold_s}")
    return max(1, min(query_len, math.ceil(round(query_len * threshold_s, 9))))


def _frozen_pois(pois: Iterable[int]) -> np.ndarray:
    arr = np.array(pois, dtype=POI_DTYPE).reshape(-1)
    arr.setflags(write=False)
    return arr


class Trajectory:
    """An ordered, immutable sequence of POI ids.

    ``id`` is the corpus position, or ``None`` for a free-standing query.
    """

    __slots__ = ("id", "pois")

    def __init__(self, pois: Iterable[int], id: int | None = None):
        arr = pois if isinstance(pois, np.ndarray) and not pois.flags.writeable and pois.dtype == POI_DTYPE else _frozen_pois(pois)
        if arr.shape[0] == 0:
            raise ValueError("a trajectory needs at least one POI")
        object.__setattr__(self, "id", id)
        object.__setattr__(self, "pois", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Trajectory is immutable")

    def __len__(self) -> int:
        return int(self.pois.shape[0])

    def __iter__(self) -> Iterator[int]:
        return iter(self.pois.tolist())

    def __getitem__(self, i):
        return self.pois[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.pois, other.pois)

    def __hash__(self) -> int:
        return hash((self.id, self.pois.tobytes()))

    def __repr__(self) -> str:
        return f"Trajectory(id={self.id}, pois={self.pois.tolist()})"

    def position_of(self, poi: int) -> int | None:
        return position_of(poi, self)


def as_poi_array(q: "Trajectory | Sequence[int] | np.ndarray") -> np.ndarray:
    """Contiguous ``int32`` view of a query, whatever form it arrives in."""
    if isinstance(q, Trajectory):
        return q.pois
    return np.ascontiguousarray(np.asarray(q, dtype=POI_DTYPE).reshape(-1))


def position_of(poi: int, t: "Trajectory | Sequence[int]") -> int | None:
    """First (smallest) 0-based position of ``poi`` in ``t``, or ``None``."""
    hits = np.flatnonzero(as_poi_array(t) == poi)
    return int(hits[0]) if hits.shape[0] else None


class TrajectoryCorpus:
    """A sealed set of trajectories stored as one CSR pair of arrays.

    ``offsets[i]:offsets[i+1]`` slices ``pois`` for trajectory ``i``;
    ``vocabulary[k]`` is the external id of POI ``k``.
    """

    def __init__(self, offsets: np.ndarray, pois: np.ndarray, vocabulary: Sequence[str]):
        offsets = np.ascontiguousarray(offsets, dtype=OFFSET_DTYPE)
        pois = np.ascontiguousarray(pois, dtype=POI_DTYPE)
        if offsets.ndim != 1 or offsets.shape[0] < 1 or offsets[0] != 0 or offsets[-1] != pois.shape[0]:
            raise ValueError("malformed corpus offsets")
        if np.any(np.diff(offsets) < 1):
            raise ValueError("every trajectory needs at least one POI")
        vocabulary = tuple(str(v) for v in vocabulary)
        if pois.shape[0] and (pois.min() < 0 or pois.max() >= len(vocabulary)):
            raise ValueError("POI id outside the vocabulary")
        if len(set(vocabulary)) != len(vocabulary):
            raise ValueError("duplicate external POI id in vocabulary")
        offsets.setflags(write=False)
        pois.setflags(write=False)
        self.offsets = offsets
        self.pois = pois
        self.vocabulary = vocabulary
        self._lookup = {v: i for i, v in enumerate(vocabulary)}

    @classmethod
    def from_ids(cls, sequences: Iterable[Iterable[int]], vocabulary: Sequence[str] | None = None) -> "TrajectoryCorpus":
        """Corpus from already-interned integer POI sequences.

        Without ``vocabulary`` the external id of POI ``k`` is ``str(k)``.
        """
        arrays = [np.asarray(list(s), dtype=POI_DTYPE) for s in sequences]
        offsets = np.zeros(len(arrays) + 1, dtype=OFFSET_DTYPE)
        if arrays:
            np.cumsum([a.shape[0] for a in arrays], out=offsets[1:])
        pois = np.concatenate(arrays) if arrays else np.zeros(0, dtype=POI_DTYPE)
        if vocabulary is None:
            n = int(pois.max()) + 1 if pois.shape[0] else 0
            vocabulary = [str(i) for i in range(n)]
        return cls(offsets, pois, vocabulary)

    @classmethod
    def from_sequences(cls, sequences: Iterable[Iterable[object]]) -> "TrajectoryCorpus":
        """Corpus from sequences of external POI ids, interned in sorted order."""
        seqs = [[str(x) for x in s] for s in sequences]
        vocabulary = sorted({x for s in seqs for x in s})
        lookup = {v: i for i, v in enumerate(vocabulary)}
        return cls.from_ids(([lookup[x] for x in s] for s in seqs), vocabulary)

    def __len__(self) -> int:
        return int(self.offsets.shape[0] - 1)

    def __getitem__(self, tid: int) -> Trajectory:
        if not 0 <= tid < len(self):
            raise IndexError(tid)
        return Trajectory(self.pois[self.offsets[tid]:self.offsets[tid + 1]], id=tid)

    def __iter__(self) -> Iterator[Trajectory]:
        for tid in range(len(self)):
            yield self[tid]

    @property
    def trajectories(self) -> list[Trajectory]:
        return list(self)

    @property
    def n_pois(self) -> int:
        return len(self.vocabulary)

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def poi_vocabulary(self) -> set[int]:
        """POI ids that occur in at least one trajectory."""
        return set(np.unique(self.pois).tolist())

    def encode(self, external_ids: Iterable[object]) -> np.ndarray:
        """Map external ids to POI ids; unknown ids become ``UNKNOWN_POI``."""
        return np.array([self._lookup.get(str(x), UNKNOWN_POI) for x in external_ids], dtype=POI_DTYPE)

    def decode(self, pois: Iterable[int]) -> list[str]:
        return [self.vocabulary[p] for p in pois]

    def external(self, tid: int) -> list[str]:
        return self.decode(self[tid])

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrajectoryCorpus):
            return NotImplemented
        return (self.vocabulary == other.vocabulary
                and np.array_equal(self.offsets, other.offsets)
                and np.array_equal(self.pois, other.pois))

    def __repr__(self) -> str:
        return f"TrajectoryCorpus({len(self)} trajectories, {self.n_pois} POIs)"


@dataclass(frozen=True)
class QuerySpec:
    query: Trajectory
    threshold_s: float
    mode: SearchMode = SearchMode.INDEX_1P
    epsilon: float | None = None

    def __post_init__(self):
        if not isinstance(self.query, Trajectory):
            object.__setattr__(self, "query", Trajectory(self.query))
        object.__setattr__(self, "mode", SearchMode.parse(self.mode))
        required_common_pois(len(self.query), self.threshold_s)
        if self.mode is SearchMode.INDEX_CONTEXTUAL and self.epsilon is None:
            raise ValueError("contextual mode needs epsilon")
        if self.epsilon is not None and not -1.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [-1, 1], got {self.epsilon}")

    @property
    def p(self) -> int:
        return required_common_pois(len(self.query), self.threshold_s)
