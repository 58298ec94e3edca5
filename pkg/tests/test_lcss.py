import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import lcss_bruteforce, random_relation
from trajsearch.lcss import EXACT, MatchFn, baseline_ids, baseline_search, lcss_length
from trajsearch.model import TrajectoryCorpus

A, B, C, D, E, F, G, H, K, M, O, P = range(12)


def test_golden_example_one():
    assert lcss_length([A, D, B, E, C], [F, D, G, E, H, C, A]) == 3


def test_golden_example_two():
    assert lcss_length([A, B, C, D, E], [M, O, A, B, F, C, P, E]) == 4
    assert lcss_length([A, B, C, D, E], [K, A, F, D]) == 2


def test_example_two_search():
    corpus = TrajectoryCorpus.from_ids([[K, A, F, D], [M, O, A, B, F, C, P, E]])
    assert baseline_search(corpus, [A, B, C, D, E], 0.6) == {1}
    assert baseline_ids(corpus, [A, B, C, D, E], 0.6).tolist() == [1]


def test_edge_cases(kern):
    args = EXACT.kernel_args
    q = np.array([1, 2], np.int32)
    assert kern.lcss_length(q, np.zeros(0, np.int32), *args) == 0
    assert kern.lcss_length(q, q, *args) == 2
    assert kern.lcss_length(np.array([1, 1, 1], np.int32), np.array([1], np.int32), *args) == 1


seqs = st.lists(st.integers(0, 4), min_size=1, max_size=8)


@settings(max_examples=300, deadline=None)
@given(seqs, seqs)
def test_matches_bruteforce_both_backends(q, t):
    from trajsearch import kernels
    expected = lcss_bruteforce(q, t)
    qa, ta = np.array(q, np.int32), np.array(t, np.int32)
    for name in ("numpy", "numba"):
        assert kernels.load(name).lcss_length(qa, ta, *EXACT.kernel_args) == expected


@settings(max_examples=100, deadline=None)
@given(seqs, seqs, st.integers(0, 2**31 - 1))
def test_relation_matches_bruteforce(q, t, seed):
    rel = random_relation(np.random.default_rng(seed), 5, 0.3)
    m = MatchFn.from_matrix(rel)
    assert lcss_length(q, t, m) == lcss_bruteforce(q, t, lambda a, b: bool(rel[a, b]))


@settings(max_examples=200, deadline=None)
@given(seqs, seqs)
def test_symmetric_and_bounded(q, t):
    n = lcss_length(q, t)
    assert n == lcss_length(t, q)
    assert 0 <= n <= min(len(q), len(t))


def test_match_fn():
    rel = np.zeros((3, 3), bool)
    rel[0, 2] = True
    m = MatchFn.from_matrix(rel)
    assert m(0, 0) and m(0, 2) and not m(2, 0) and not m(1, 2)
    assert m.row(0).tolist() == [0, 2]
    assert EXACT(1, 1) and not EXACT(1, 2)
    # unknown query POIs match nothing, not even via the relation
    assert not m(-1, 2)


def test_baseline_scan_matches_per_pair_dp(kern):
    rng = np.random.default_rng(3)
    seqs_ = [rng.integers(0, 6, rng.integers(1, 9)).tolist() for _ in range(60)]
    corpus = TrajectoryCorpus.from_ids(seqs_, [str(i) for i in range(6)])
    for _ in range(20):
        q = rng.integers(0, 6, rng.integers(1, 8)).astype(np.int32)
        for p in range(1, len(q) + 1):
            got = kern.baseline_scan(q, p, corpus.offsets, corpus.pois, *EXACT.kernel_args)
            want = [i for i, s in enumerate(seqs_) if lcss_bruteforce(q.tolist(), s) >= p]
            assert got.tolist() == want


def test_baseline_rejects_bad_threshold():
    corpus = TrajectoryCorpus.from_ids([[0, 1]])
    with pytest.raises(ValueError):
        baseline_search(corpus, [0], 0.0)
