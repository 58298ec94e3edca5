import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trajsearch.model import (QuerySpec, SearchMode, Trajectory, TrajectoryCorpus, UNKNOWN_POI,
                              position_of, required_common_pois)


@pytest.mark.parametrize("n, s, p", [(5, 0.6, 3), (5, 0.5, 3), (4, 0.5, 2), (10, 0.1, 1), (3, 1.0, 3),
                                     (7, 0.3, 3), (10, 0.3, 3), (1, 0.01, 1)])
def test_required_common_pois(n, s, p):
    assert required_common_pois(n, s) == p


@given(st.integers(1, 60), st.integers(1, 10))
def test_required_common_pois_matches_decimal_ceil(n, tenths):
    # S on the tenths grid: exact integer arithmetic as the reference
    assert required_common_pois(n, tenths / 10) == -(-n * tenths // 10)


@pytest.mark.parametrize("s", [0.0, -0.1, 1.01, math.nan])
def test_required_common_pois_rejects_threshold(s):
    with pytest.raises(ValueError):
        required_common_pois(5, s)


def test_required_common_pois_rejects_empty_query():
    with pytest.raises(ValueError):
        required_common_pois(0, 0.5)


def test_trajectory_basics():
    t = Trajectory([3, 1, 3, 2], id=7)
    assert len(t) == 4 and list(t) == [3, 1, 3, 2] and t.id == 7
    assert t.position_of(3) == 0 and t.position_of(2) == 3 and t.position_of(9) is None
    assert position_of(1, [5, 1]) == 1
    assert t == Trajectory([3, 1, 3, 2], id=7) and hash(t) == hash(Trajectory([3, 1, 3, 2], id=7))
    assert t != Trajectory([3, 1, 3, 2])  # identity includes the corpus id
    with pytest.raises(ValueError):
        t.pois[0] = 5
    with pytest.raises(AttributeError):
        t.id = 1
    with pytest.raises(ValueError):
        Trajectory([])


def test_corpus_from_sequences_interns_sorted():
    c = TrajectoryCorpus.from_sequences([["b", "a"], ["c", "a", "b"]])
    assert c.vocabulary == ("a", "b", "c")
    assert len(c) == 2 and c.n_pois == 3
    assert c[0].pois.tolist() == [1, 0] and c.external(1) == ["c", "a", "b"]
    assert c.lengths.tolist() == [2, 3]
    assert c.encode(["a", "zz"]).tolist() == [0, UNKNOWN_POI]
    assert c.decode([2, 0]) == ["c", "a"]
    assert c.poi_vocabulary == {0, 1, 2}
    assert [t.id for t in c] == [0, 1]


def test_corpus_is_sealed_and_validated():
    c = TrajectoryCorpus.from_ids([[0, 1]], ["x", "y"])
    with pytest.raises(ValueError):
        c.pois[0] = 1
    with pytest.raises(ValueError):
        TrajectoryCorpus(np.array([0, 2]), np.array([0, 5]), ["x", "y"])  # POI out of range
    with pytest.raises(ValueError):
        TrajectoryCorpus(np.array([0, 0]), np.array([], dtype=np.int32), ["x"])  # empty trajectory
    with pytest.raises(IndexError):
        c[3]


def test_corpus_equality():
    a = TrajectoryCorpus.from_ids([[0, 1], [1]], ["x", "y"])
    b = TrajectoryCorpus.from_ids([[0, 1], [1]], ["x", "y"])
    assert a == b
    assert a != TrajectoryCorpus.from_ids([[0, 1], [0]], ["x", "y"])


def test_search_mode_parse():
    assert SearchMode.parse("1p") is SearchMode.INDEX_1P
    assert SearchMode.parse("index-2p") is SearchMode.INDEX_2P
    assert SearchMode.parse("contextual") is SearchMode.INDEX_CONTEXTUAL
    assert SearchMode.parse(SearchMode.BASELINE) is SearchMode.BASELINE
    with pytest.raises(ValueError):
        SearchMode.parse("3p")


def test_query_spec_validation():
    spec = QuerySpec([1, 2, 3, 4, 5], 0.6, SearchMode.INDEX_1P)
    assert spec.p == 3
    with pytest.raises(ValueError):
        QuerySpec([], 0.5, SearchMode.INDEX_1P)
    with pytest.raises(ValueError):
        QuerySpec([1], 0.5, SearchMode.INDEX_CONTEXTUAL)  # needs epsilon
    with pytest.raises(ValueError):
        QuerySpec([1], 0.5, SearchMode.INDEX_CONTEXTUAL, epsilon=1.5)
