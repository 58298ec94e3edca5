import numpy as np

from trajsearch.synthetic import uniform_corpus, zipf_corpus


def test_uniform_corpus_shape():
    c = uniform_corpus(50, 10, 3, 6, seed=1)
    assert len(c) == 50 and c.n_pois == 10
    assert c.lengths.min() >= 3 and c.lengths.max() <= 6
    assert c == uniform_corpus(50, 10, 3, 6, seed=1)


def test_zipf_corpus_shape_and_skew():
    c = zipf_corpus(n_trajectories=3000, n_pois=500, seed=2)
    assert len(c) == 3000 and c.n_pois == 500
    assert c.lengths.min() >= 3 and c.lengths.max() <= 30
    assert 4.5 < c.lengths.mean() < 5.5
    counts = np.sort(np.bincount(c.pois, minlength=500))[::-1]
    # rank 1 against rank 10 under exponent 1 is about 10 to 1
    assert 5 < counts[0] / counts[9] < 20
    assert c == zipf_corpus(n_trajectories=3000, n_pois=500, seed=2)


def test_clusters_only_change_draws():
    plain = zipf_corpus(n_trajectories=500, n_pois=200, seed=3)
    same = zipf_corpus(n_trajectories=500, n_pois=200, seed=3, clusters=0, locality=0.5)
    local = zipf_corpus(n_trajectories=500, n_pois=200, seed=3, clusters=8)
    assert plain == same
    assert np.array_equal(plain.lengths, local.lengths) and local != plain


def test_clustered_trajectories_stay_local():
    c = zipf_corpus(n_trajectories=2000, n_pois=300, seed=4, clusters=10, locality=1.0)
    # with full locality every trajectory sits inside one area, so the
    # POI co-visit graph splits into at most ten components
    parent = list(range(c.n_pois))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t in c:
        p = t.pois.tolist()
        for y in p[1:]:
            parent[find(y)] = find(p[0])
    used = np.unique(c.pois).tolist()
    assert len({find(x) for x in used}) <= 10
