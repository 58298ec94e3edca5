"""LCSS length under a pluggable POI match relation, and the exhaustive scan."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import kernels
from .model import OFFSET_DTYPE, POI_DTYPE, Trajectory, TrajectoryCorpus, as_poi_array, required_common_pois


class MatchFn:
    """A reflexive binary relation over POI ids.

    ``MatchFn()`` is plain equality. Any other relation is stored as sorted
    CSR rows: ``b`` matches ``a`` iff ``a == b`` or ``b`` is in row ``a``.
    ``a`` is the query-side POI.
    """

    __slots__ = ("offsets", "targets", "exact")

    def __init__(self, offsets: np.ndarray | None = None, targets: np.ndarray | None = None):
        if offsets is None:
            self.exact = True
            self.offsets = np.zeros(1, dtype=OFFSET_DTYPE)
            self.targets = np.zeros(0, dtype=POI_DTYPE)
        else:
            self.exact = False
            self.offsets = np.ascontiguousarray(offsets, dtype=OFFSET_DTYPE)
            self.targets = np.ascontiguousarray(targets, dtype=POI_DTYPE)

    @classmethod
    def from_matrix(cls, related: np.ndarray) -> "MatchFn":
        """Relation from a square boolean matrix; the diagonal is forced true."""
        related = np.asarray(related, dtype=bool)
        n = related.shape[0]
        if related.shape != (n, n):
            raise ValueError("relation matrix must be square")
        related = related.copy()
        related[np.arange(n), np.arange(n)] = True
        rows, cols = np.nonzero(related)
        offsets = np.zeros(n + 1, dtype=OFFSET_DTYPE)
        np.cumsum(np.bincount(rows, minlength=n), out=offsets[1:])
        return cls(offsets, cols)

    @property
    def kernel_args(self) -> tuple[bool, np.ndarray, np.ndarray]:
        return self.exact, self.offsets, self.targets

    def row(self, a: int) -> np.ndarray:
        if self.exact or not 0 <= a < self.offsets.shape[0] - 1:
            return np.array([a], dtype=POI_DTYPE) if a >= 0 else self.targets[:0]
        return self.targets[self.offsets[a]:self.offsets[a + 1]]

    def __call__(self, a: int, b: int) -> bool:
        if a == b:
            return True
        if self.exact or not 0 <= a < self.offsets.shape[0] - 1:
            return False
        row = self.targets[self.offsets[a]:self.offsets[a + 1]]
        k = int(np.searchsorted(row, b))
        return k < row.shape[0] and int(row[k]) == b

    def __repr__(self) -> str:
        if self.exact:
            return "MatchFn(exact)"
        return f"MatchFn({self.offsets.shape[0] - 1} rows, {self.targets.shape[0]} pairs)"


EXACT = MatchFn()


def lcss_length(q: Trajectory | Sequence[int], t: Trajectory | Sequence[int], match: MatchFn = EXACT) -> int:
    """Length of the longest common subsequence of ``q`` and ``t`` under ``match``."""
    qa, ta = as_poi_array(q), as_poi_array(t)
    return int(kernels.active.lcss_length(qa, ta, *match.kernel_args))


def baseline_search(corpus: TrajectoryCorpus, q: Trajectory | Sequence[int], threshold_s: float,
                    match: MatchFn = EXACT) -> set[int]:
    """Ids of every trajectory whose LCSS with ``q`` reaches ``ceil(|q| * S)``.

    Runs the DP once per corpus trajectory.
    """
    return set(baseline_ids(corpus, q, threshold_s, match).tolist())


def baseline_ids(corpus: TrajectoryCorpus, q, threshold_s: float, match: MatchFn = EXACT) -> np.ndarray:
    """Sorted-array form of :func:`baseline_search`."""
    qa = as_poi_array(q)
    p = required_common_pois(qa.shape[0], threshold_s)
    return kernels.active.baseline_scan(qa, p, corpus.offsets, corpus.pois, *match.kernel_args)
