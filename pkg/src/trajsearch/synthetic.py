"""Seeded synthetic corpora for tests and desk-scale benchmarks."""

from __future__ import annotations

import numpy as np

from .model import TrajectoryCorpus


def uniform_corpus(n_trajectories: int = 200, alphabet: int = 50, min_len: int = 3, max_len: int = 15,
                   seed: int = 0) -> TrajectoryCorpus:
    """Lengths uniform in ``[min_len, max_len]``, POIs uniform over the alphabet."""
    rng = np.random.default_rng(seed)
    lengths = rng.integers(min_len, max_len + 1, size=n_trajectories)
    seqs = [rng.integers(0, alphabet, size=n).tolist() for n in lengths.tolist()]
    return TrajectoryCorpus.from_ids(seqs, [str(i) for i in range(alphabet)])


def zipf_corpus(n_trajectories: int = 10_000, n_pois: int = 3_000, exponent: float = 1.0,
                min_len: int = 3, max_len: int = 30, mean_len: float = 5.0,
                seed: int = 0, clusters: int = 0, locality: float = 0.9) -> TrajectoryCorpus:
    """Check-in-like corpus: POI popularity follows a truncated Zipf law.

    Lengths are ``min_len`` plus a geometric excess chosen so the mean is
    close to ``mean_len``, capped at ``max_len``. POI ids are shuffled so
    popularity does not follow id order.

    With ``clusters > 0`` POIs are split into that many areas. Each
    trajectory gets a home area (weighted by popularity) and each visit is
    redrawn from it with probability ``locality``, which gives POIs
    distinct contexts for embedding training. The default corpus is
    unaffected by these two arguments.
    """
    rng = np.random.default_rng(seed)
    ranks = np.arange(1, n_pois + 1, dtype=np.float64)
    weights = ranks ** -exponent
    weights /= weights.sum()
    identity = rng.permutation(n_pois)
    excess_mean = max(mean_len - min_len, 1e-9)
    excess = rng.geometric(1.0 / (excess_mean + 1.0), size=n_trajectories) - 1
    lengths = np.minimum(min_len + excess, max_len)
    total = int(lengths.sum())
    draws = _draw(weights, rng.random(total))
    if clusters > 0:
        area_of = rng.integers(0, clusters, size=n_pois)
        area_weight = np.bincount(area_of, weights=weights, minlength=clusters)
        home = np.repeat(_draw(area_weight / area_weight.sum(), rng.random(n_trajectories)), lengths)
        local = rng.random(total) < locality
        u = rng.random(total)
        for a in range(clusters):
            members = np.flatnonzero(area_of == a)
            pick = local & (home == a)
            if members.shape[0] and pick.any():
                draws[pick] = members[_draw(weights[members] / weights[members].sum(), u[pick])]
    draws = identity[draws]
    bounds = np.concatenate(([0], np.cumsum(lengths)))
    seqs = [draws[a:b].tolist() for a, b in zip(bounds[:-1].tolist(), bounds[1:].tolist())]
    return TrajectoryCorpus.from_ids(seqs, [f"poi{i}" for i in range(n_pois)])


def _draw(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.minimum(np.searchsorted(cdf, u, side="right"), weights.shape[0] - 1)
