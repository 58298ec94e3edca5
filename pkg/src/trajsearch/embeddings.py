"""POI embeddings: skip-gram training, vector files, cosine neighbourhoods.

Cosines are computed from unit-normalised vectors with the dimensions
summed in a fixed left-to-right order, so ``cos(a, b)`` and ``cos(b, a)``
are bit-identical and every caller sees the same threshold decisions.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .lcss import MatchFn
from .model import OFFSET_DTYPE, POI_DTYPE, TrajectoryCorpus


class EmbeddingError(ValueError):
    pass


def _ordered_dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    acc = a[..., 0] * b[..., 0]
    for k in range(1, a.shape[-1]):
        acc = acc + a[..., k] * b[..., k]
    return acc


# parallel vectors can land an ulp or two below 1 after normalisation
_ONE_SLACK = 1e-12


def _clamp_cos(c):
    c = np.clip(c, -1.0, 1.0)
    return np.where(c >= 1.0 - _ONE_SLACK, 1.0, c)


def _unit_rows(vectors: np.ndarray) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.sqrt(_ordered_dot(vectors, vectors))
    if np.any(norms == 0):
        raise EmbeddingError("zero vector has no direction")
    return vectors / norms[..., None]


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    """Cosine of the angle between ``u`` and ``v``, clamped to [-1, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise EmbeddingError(f"dimension mismatch: {u.shape} vs {v.shape}")
    uu, vv = _unit_rows(np.stack([u, v]))
    return float(_clamp_cos(_ordered_dot(uu, vv)))


@dataclass
class EmbeddingTable:
    """One dense vector per POI, keyed by external POI id."""

    keys: list[str]
    vectors: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.keys = [str(k) for k in self.keys]
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.keys):
            raise EmbeddingError("need one vector row per key")
        if len(set(self.keys)) != len(self.keys):
            raise EmbeddingError("duplicate POI key in embedding table")
        if np.any(~np.isfinite(self.vectors)):
            raise EmbeddingError("non-finite vector component")
        zero = np.flatnonzero(~self.vectors.any(axis=1))
        if zero.shape[0]:
            raise EmbeddingError(f"zero vector for POI {self.keys[zero[0]]!r}")
        self._row = {k: i for i, k in enumerate(self.keys)}
        self._unit = _unit_rows(self.vectors) if len(self.keys) else self.vectors

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, key) -> bool:
        return str(key) in self._row

    def __getitem__(self, key) -> np.ndarray:
        try:
            return self.vectors[self._row[str(key)]]
        except KeyError:
            raise EmbeddingError(f"no vector for POI {key!r}") from None

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        return self.keys == other.keys and np.array_equal(self.vectors, other.vectors)

    def rows_for(self, vocabulary: Sequence[str]) -> np.ndarray:
        """Row index of each vocabulary entry; raises naming the first missing POI."""
        rows = np.empty(len(vocabulary), dtype=np.int64)
        for i, key in enumerate(vocabulary):
            r = self._row.get(str(key))
            if r is None:
                raise EmbeddingError(f"no vector for POI {key!r}")
            rows[i] = r
        return rows

    def unit_vectors(self, vocabulary: Sequence[str]) -> np.ndarray:
        return self._unit[self.rows_for(vocabulary)]

    def cosine(self, a, b) -> float:
        ua = self._unit[self._row_of(a)]
        ub = self._unit[self._row_of(b)]
        return float(_clamp_cos(_ordered_dot(ua, ub)))

    def _row_of(self, key) -> int:
        r = self._row.get(str(key))
        if r is None:
            raise EmbeddingError(f"no vector for POI {key!r}")
        return r

    def digest(self) -> bytes:
        h = hashlib.sha256()
        for k in self.keys:
            h.update(k.encode("utf-8") + b"\n")
        h.update(np.ascontiguousarray(self.vectors, dtype="<f8").tobytes())
        return h.digest()


def sim_epsilon(a, b, table: EmbeddingTable, epsilon: float) -> bool:
    """True iff POIs ``a`` and ``b`` are epsilon-similar (identity always is)."""
    ca = table.cosine(a, b)  # raises for missing POIs, even when a == b
    return str(a) == str(b) or ca >= epsilon


@dataclass(frozen=True)
class Neighborhood:
    """Epsilon-neighbourhoods as CSR rows sorted by neighbour POI id."""

    epsilon: float
    offsets: np.ndarray
    neighbors: np.ndarray
    cosines: np.ndarray

    def __len__(self) -> int:
        return int(self.offsets.shape[0] - 1)

    def __getitem__(self, poi: int) -> list[tuple[int, float]]:
        lo, hi = self.offsets[poi], self.offsets[poi + 1]
        return list(zip(self.neighbors[lo:hi].tolist(), self.cosines[lo:hi].tolist()))

    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    def to_match(self) -> MatchFn:
        return MatchFn(self.offsets, self.neighbors)


def neighborhoods(table: EmbeddingTable, vocabulary: Sequence[str], epsilon: float,
                  block: int = 512) -> Neighborhood:
    """Exact all-pairs epsilon-neighbourhoods over ``vocabulary``.

    POI ``k`` is ``vocabulary[k]``; the result is indexed the same way.
    """
    if not -1.0 <= epsilon <= 1.0:
        raise EmbeddingError(f"epsilon must be in [-1, 1], got {epsilon}")
    unit = table.unit_vectors(vocabulary)
    n = unit.shape[0]
    counts = np.zeros(n, dtype=OFFSET_DTYPE)
    cols, vals = [], []
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        cos = _clamp_cos(_ordered_dot(unit[lo:hi, None, :], unit[None, :, :]))
        cos[np.arange(hi - lo), np.arange(lo, hi)] = 1.0
        r, c = np.nonzero(cos >= epsilon)
        counts[lo:hi] = np.bincount(r, minlength=hi - lo)
        cols.append(c.astype(POI_DTYPE))
        vals.append(cos[r, c])
    offsets = np.zeros(n + 1, dtype=OFFSET_DTYPE)
    np.cumsum(counts, out=offsets[1:])
    neighbors = np.concatenate(cols) if cols else np.zeros(0, dtype=POI_DTYPE)
    cosines = np.concatenate(vals) if vals else np.zeros(0)
    return Neighborhood(float(epsilon), offsets, neighbors, cosines)


def epsilon_match(table: EmbeddingTable, vocabulary: Sequence[str], epsilon: float) -> MatchFn:
    """The epsilon-similarity relation as a :class:`MatchFn` over corpus POI ids."""
    return neighborhoods(table, vocabulary, epsilon).to_match()


@dataclass(frozen=True)
class SkipGramConfig:
    dim: int = 10
    window: int = 5
    epochs: int = 5
    negatives: int = 5
    alpha: float = 0.025
    min_alpha: float = 0.0001
    sample: float = 0.0
    ns_exponent: float = 0.75
    seed: int = 1


def _window_pair_counts(sent_off: np.ndarray, reduced: np.ndarray, window: int) -> np.ndarray:
    n = reduced.shape[0]
    lengths = np.diff(sent_off)
    lo = np.repeat(sent_off[:-1], lengths)
    hi = np.repeat(sent_off[1:], lengths)
    i = np.arange(n)
    start = np.maximum(lo, i - window + reduced)
    stop = np.minimum(hi, i + window + 1 - reduced)
    return stop - start - 1


def _subsample(tokens: np.ndarray, sent_off: np.ndarray, counts: np.ndarray, sample: float,
               rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if sample <= 0:
        return tokens, sent_off
    threshold = sample * tokens.shape[0]
    freq = counts[tokens].astype(np.float64)
    keep_p = (np.sqrt(freq / threshold) + 1.0) * threshold / freq
    keep = rng.random(tokens.shape[0]) < keep_p
    sent_id = np.repeat(np.arange(sent_off.shape[0] - 1), np.diff(sent_off))
    kept_per = np.bincount(sent_id[keep], minlength=sent_off.shape[0] - 1)
    off = np.zeros(sent_off.shape[0], dtype=OFFSET_DTYPE)
    np.cumsum(kept_per, out=off[1:])
    return tokens[keep], off


def train_skipgram(corpus: TrajectoryCorpus, dim: int = 10, window: int = 5, epochs: int = 5,
                   negatives: int = 5, alpha: float = 0.025, min_alpha: float = 0.0001,
                   seed: int = 1, sample: float = 0.0, kernel_module=None) -> EmbeddingTable:
    """Skip-gram with negative sampling, trajectories as sentences.

    The learning rate decays linearly from ``alpha`` to ``min_alpha`` over
    all epochs. Every random draw comes from one ``numpy`` generator seeded
    with ``seed``, so a fixed seed reproduces the table exactly.
    """
    if len(corpus) == 0:
        raise EmbeddingError("cannot train embeddings on an empty corpus")
    if dim < 1 or window < 1 or epochs < 0 or negatives < 0:
        raise EmbeddingError("dim, window must be >= 1; epochs, negatives >= 0")
    k = kernel_module or kernels.active
    cfg = SkipGramConfig(dim, window, epochs, negatives, alpha, min_alpha, sample, 0.75, seed)
    rng = np.random.default_rng(seed)
    n_pois = corpus.n_pois
    counts = np.bincount(corpus.pois, minlength=n_pois)
    weights = counts.astype(np.float64) ** cfg.ns_exponent
    cdf = np.cumsum(weights / weights.sum())
    cdf[-1] = 1.0

    w_in = ((rng.random((n_pois, dim)) - 0.5) / dim).astype(np.float64)
    w_out = np.zeros((n_pois, dim), dtype=np.float64)
    total_words = epochs * corpus.pois.shape[0]
    done = 0
    for _ in range(epochs):
        tokens, sent_off = _subsample(corpus.pois, corpus.offsets, counts, sample, rng)
        tokens = np.ascontiguousarray(tokens, dtype=POI_DTYPE)
        n_tok = tokens.shape[0]
        reduced = rng.integers(0, window, size=n_tok).astype(np.int64)
        n_pairs = int(_window_pair_counts(sent_off, reduced, window).sum())
        draws = np.searchsorted(cdf, rng.random((n_pairs, negatives)), side="right")
        negs = np.ascontiguousarray(np.minimum(draws, n_pois - 1), dtype=POI_DTYPE)
        progress = (done + np.arange(n_tok)) / max(total_words, 1)
        alphas = np.maximum(min_alpha, alpha - (alpha - min_alpha) * progress)
        used = k.sgns_epoch(tokens, np.ascontiguousarray(sent_off, dtype=OFFSET_DTYPE),
                            w_in, w_out, reduced, negs, alphas, window)
        assert used == n_pairs
        done += corpus.pois.shape[0]

    zero = np.flatnonzero(~w_in.any(axis=1))
    if zero.shape[0]:  # pragma: no cover - needs an exact cancellation
        raise EmbeddingError(f"training produced a zero vector for {corpus.vocabulary[zero[0]]!r}")
    meta = {
        "trainer": "skipgram-negative-sampling",
        "dim": dim, "window": window, "epochs": epochs, "negatives": negatives,
        "alpha": alpha, "min_alpha": min_alpha, "sample": sample,
        "ns_exponent": cfg.ns_exponent, "seed": seed,
        "backend": getattr(k, "__name__", "?").rsplit("_", 1)[-1],
    }
    return EmbeddingTable(list(corpus.vocabulary), w_in, meta)


def save_vectors(table: EmbeddingTable, path: str | Path, write_metadata: bool = True) -> None:
    """Write the ``V d`` header plus one ``id v1 .. vd`` row per POI."""
    lines = [f"{len(table)} {table.dim}"]
    for key, vec in zip(table.keys, table.vectors):
        if not key or any(ch.isspace() for ch in key):
            raise EmbeddingError(f"POI id {key!r} cannot be written to a space-separated file")
        lines.append(key + " " + " ".join(repr(float(x)) for x in vec))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if write_metadata:
        metadata_path(path).write_text(json.dumps(table.metadata, indent=2, sort_keys=True) + "\n")


def metadata_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def load_vectors(path: str | Path) -> EmbeddingTable:
    """Read a word-vector text file. The ``V d`` header line is optional."""
    keys: list[str] = []
    rows: list[list[float]] = []
    header = None
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                header = (int(parts[0]), int(parts[1]))
                dim = header[1]
                continue
            key, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            if len(values) != dim:
                raise EmbeddingError(f"line {lineno} ({key!r}): expected {dim} components, got {len(values)}")
            try:
                vec = [float(x) for x in values]
            except ValueError:
                raise EmbeddingError(f"line {lineno} ({key!r}): non-numeric component") from None
            if not all(math.isfinite(x) for x in vec):
                raise EmbeddingError(f"line {lineno} ({key!r}): non-finite component")
            keys.append(key)
            rows.append(vec)
    if header is not None and header[0] != len(keys):
        raise EmbeddingError(f"header announces {header[0]} rows, file has {len(keys)}")
    seen: set[str] = set()
    for key in keys:
        if key in seen:
            raise EmbeddingError(f"duplicate row for POI {key!r}")
        seen.add(key)
    meta = {}
    mp = metadata_path(path)
    if mp.exists():
        meta = json.loads(mp.read_text())
    vectors = np.array(rows, dtype=np.float64).reshape(len(rows), dim or 0)
    return EmbeddingTable(keys, vectors, meta)


def table_from_vectors(vectors: np.ndarray, keys: Iterable[object] | None = None) -> EmbeddingTable:
    """Table for POI ids ``0..n-1`` (or ``keys``) from a vector matrix."""
    vectors = np.asarray(vectors, dtype=np.float64)
    keys = [str(k) for k in (keys if keys is not None else range(vectors.shape[0]))]
    return EmbeddingTable(keys, vectors)
