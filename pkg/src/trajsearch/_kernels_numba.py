"""numba-compiled inner loops.

Every kernel here has a twin in ``_kernels_numpy`` with the same signature
and the same results; ``trajsearch.kernels`` picks one of them.

Match relations are passed as ``(exact, rel_off, rel_tgt)``: when ``exact``
is true two POIs match iff they are equal, otherwise ``b`` matches ``a`` iff
``a == b`` or ``b`` is in the sorted row ``rel_tgt[rel_off[a]:rel_off[a+1]]``.
"""

import numpy as np
from numba import njit

_OPTS = dict(cache=True, nogil=True)


@njit(**_OPTS)
def _in_sorted(arr, lo, hi, x):
    while lo < hi:
        mid = (lo + hi) >> 1
        v = arr[mid]
        if v < x:
            lo = mid + 1
        elif v > x:
            hi = mid
        else:
            return True
    return False


@njit(**_OPTS)
def _match(a, b, exact, rel_off, rel_tgt):
    if a == b:
        return True
    if exact or a < 0 or b < 0 or a + 1 >= rel_off.shape[0]:
        return False
    return _in_sorted(rel_tgt, rel_off[a], rel_off[a + 1], b)


@njit(**_OPTS)
def lcss_length(q, t, exact, rel_off, rel_tgt):
    n = t.shape[0]
    if q.shape[0] == 0 or n == 0:
        return 0
    prev = np.zeros(n + 1, dtype=np.int32)
    cur = np.zeros(n + 1, dtype=np.int32)
    for i in range(q.shape[0]):
        qi = q[i]
        cur[0] = 0
        for j in range(1, n + 1):
            if _match(qi, t[j - 1], exact, rel_off, rel_tgt):
                cur[j] = prev[j - 1] + 1
            elif prev[j] >= cur[j - 1]:
                cur[j] = prev[j]
            else:
                cur[j] = cur[j - 1]
        prev, cur = cur, prev
    return prev[n]


@njit(**_OPTS)
def baseline_scan(q, p, t_off, t_pois, exact, rel_off, rel_tgt):
    n_traj = t_off.shape[0] - 1
    out = np.empty(n_traj, dtype=np.int32)
    k = 0
    for tid in range(n_traj):
        t = t_pois[t_off[tid]:t_off[tid + 1]]
        if lcss_length(q, t, exact, rel_off, rel_tgt) >= p:
            out[k] = tid
            k += 1
    return out[:k].copy()


@njit(**_OPTS)
def same_order(c, combi, exact, rel_off, rel_tgt):
    i = 0
    j = 0
    m = 0
    nc = c.shape[0]
    nk = combi.shape[0]
    while i < nc and j < nk:
        # candidate first, combination second: the relation row is keyed by
        # the query-side POI
        if _match(combi[j], c[i], exact, rel_off, rel_tgt):
            j += 1
            m += 1
        i += 1
    return m == nk


@njit(**_OPTS)
def intersect_sorted(a, b):
    out = np.empty(min(a.shape[0], b.shape[0]), dtype=a.dtype)
    k = _intersect_into(a, 0, a.shape[0], b, 0, b.shape[0], out)
    return out[:k].copy()


@njit(**_OPTS)
def _intersect_into(a, a_lo, a_hi, b, b_lo, b_hi, out):
    """Write ``a[a_lo:a_hi] & b[b_lo:b_hi]`` into ``out``; ``out`` may alias ``a``."""
    na = a_hi - a_lo
    nb = b_hi - b_lo
    k = 0
    if na * 4 < nb:
        # short side probes the long side
        lo = b_lo
        for i in range(a_lo, a_hi):
            x = a[i]
            hi = b_hi
            while lo < hi:
                mid = (lo + hi) >> 1
                if b[mid] < x:
                    lo = mid + 1
                else:
                    hi = mid
            if lo < b_hi and b[lo] == x:
                out[k] = x
                k += 1
                lo += 1
            elif lo >= b_hi:
                break
        return k
    i = a_lo
    j = b_lo
    while i < a_hi and j < b_hi:
        x = a[i]
        y = b[j]
        if x == y:
            out[k] = x
            k += 1
            i += 1
            j += 1
        elif x < y:
            i += 1
        else:
            j += 1
    return k


@njit(**_OPTS)
def _prev_occurrence(q):
    n = q.shape[0]
    prev = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for j in range(i - 1, -1, -1):
            if q[j] == q[i]:
                prev[i] = j
                break
    return prev


@njit(**_OPTS)
def _is_canonical(pos, p, prev):
    # the leftmost embedding of its POI subsequence inside q; exactly one
    # position combination per distinct POI subsequence passes
    last = -1
    for k in range(p):
        if prev[pos[k]] > last:
            return False
        last = pos[k]
    return True


@njit(**_OPTS)
def _next_combination(pos, p, n):
    i = p - 1
    while i >= 0 and pos[i] == n - p + i:
        i -= 1
    if i < 0:
        return False
    pos[i] += 1
    for j in range(i + 1, p):
        pos[j] = pos[j - 1] + 1
    return True


_DIRECT_VERIFY = 8


@njit(**_OPTS)
def _combination_search(q, p, span, lo, hi, idx_ids, t_off, t_pois, exact, rel_off, rel_tgt):
    """Shared driver: combination ``pos`` probes the lists ``lo/hi[pos[k], pos[k + span]]``.

    ``span`` is 0 for a POI-keyed index and 1 for the pair index. The probe
    lives inline in this loop on purpose: a call per combination costs more
    than the probe itself.
    """
    n = q.shape[0]
    n_traj = t_off.shape[0] - 1
    nlists = p - span
    counters = np.zeros(3, dtype=np.int64)
    res = np.empty(n_traj, dtype=np.int32)
    if nlists < 1 or p > n or n_traj == 0:
        return res[:0].copy(), counters
    admitted = np.zeros(n_traj, dtype=np.bool_)
    buf = np.empty(n_traj, dtype=idx_ids.dtype)
    prev = _prev_occurrence(q)
    pos = np.arange(p)
    combi = np.empty(p, dtype=q.dtype)
    starts = np.empty(nlists, dtype=np.int64)
    ends = np.empty(nlists, dtype=np.int64)
    nres = 0
    more = True
    while more:
        if not _is_canonical(pos, p, prev):
            more = _next_combination(pos, p, n)
            continue
        counters[0] += 1
        # gather bounds, insertion-sorted by length; stop at an empty list
        empty = False
        for a in range(nlists):
            s = lo[pos[a], pos[a + span]]
            e = hi[pos[a], pos[a + span]]
            if e == s:
                empty = True
                break
            b = a - 1
            while b >= 0 and ends[b] - starts[b] > e - s:
                starts[b + 1] = starts[b]
                ends[b + 1] = ends[b]
                b -= 1
            starts[b + 1] = s
            ends[b + 1] = e
        if empty:
            more = _next_combination(pos, p, n)
            continue
        if nlists == 1:
            # a single posting list already certifies the whole combination
            for x in range(starts[0], ends[0]):
                c = idx_ids[x]
                if not admitted[c]:
                    admitted[c] = True
                    counters[2] += 1
                    res[nres] = c
                    nres += 1
            more = _next_combination(pos, p, n)
            continue
        k = _intersect_into(idx_ids, starts[0], ends[0], idx_ids, starts[1], ends[1], buf)
        for a in range(2, nlists):
            # a few survivors are cheaper to verify than to keep intersecting
            if k <= _DIRECT_VERIFY:
                break
            k = _intersect_into(buf, 0, k, idx_ids, starts[a], ends[a], buf)
        filled = False
        for x in range(k):
            c = buf[x]
            if admitted[c]:
                continue
            if not filled:
                for j in range(p):
                    combi[j] = q[pos[j]]
                filled = True
            counters[1] += 1
            if same_order(t_pois[t_off[c]:t_off[c + 1]], combi, exact, rel_off, rel_tgt):
                admitted[c] = True
                counters[2] += 1
                res[nres] = c
                nres += 1
        more = _next_combination(pos, p, n)
    out = res[:nres].copy()
    out.sort()
    return out, counters


@njit(**_OPTS)
def search_single(q, p, idx_off, idx_ids, t_off, t_pois, exact, rel_off, rel_tgt):
    """Combination search over a POI-keyed index (single-POI or contextual).

    Returns ``(sorted ids, [combinations, tested, passed])``.
    """
    n = q.shape[0]
    n_keys = idx_off.shape[0] - 1
    lo = np.zeros((n, n), dtype=np.int64)
    hi = np.zeros((n, n), dtype=np.int64)
    for a in range(n):
        x = q[a]
        if 0 <= x < n_keys:
            lo[a, a] = idx_off[x]
            hi[a, a] = idx_off[x + 1]
    return _combination_search(q, p, 0, lo, hi, idx_ids, t_off, t_pois, exact, rel_off, rel_tgt)


_HASH_MUL = np.uint64(0x9E3779B97F4A7C15)


@njit(**_OPTS)
def _slot(key, mask):
    return np.int64((np.uint64(key) * _HASH_MUL) >> np.uint64(20)) & mask


@njit(**_OPTS)
def build_pair_table(pair_keys):
    """Open-addressing table mapping a pair key to its row, ``-1`` = empty."""
    cap = 16
    while cap < 2 * pair_keys.shape[0]:
        cap *= 2
    table = np.full(cap, -1, dtype=np.int64)
    mask = cap - 1
    for r in range(pair_keys.shape[0]):
        s = _slot(pair_keys[r], mask)
        while table[s] >= 0:
            s = (s + 1) & mask
        table[s] = r
    return table


@njit(**_OPTS)
def _pair_row(key, pair_keys, table):
    mask = table.shape[0] - 1
    s = _slot(key, mask)
    while True:
        r = table[s]
        if r < 0:
            return -1
        if pair_keys[r] == key:
            return r
        s = (s + 1) & mask


@njit(**_OPTS)
def search_pairs(q, p, n_pois, pair_keys, pair_table, pair_off, pair_ids, t_off, t_pois):
    """Combination search over the ordered-pair index; ``p < 2`` yields nothing."""
    n = q.shape[0]
    # a query has only n*(n-1)/2 position pairs: resolve each once
    pair_lo = np.zeros((n, n), dtype=np.int64)
    pair_hi = np.zeros((n, n), dtype=np.int64)
    for a in range(n):
        x = q[a]
        for b in range(a + 1, n):
            y = q[b]
            if 0 <= x < n_pois and 0 <= y < n_pois:
                r = _pair_row(np.int64(x) * n_pois + y, pair_keys, pair_table)
                if r >= 0:
                    pair_lo[a, b] = pair_off[r]
                    pair_hi[a, b] = pair_off[r + 1]
    return _combination_search(q, p, 1, pair_lo, pair_hi, pair_ids, t_off, t_pois,
                               True, np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int32))


@njit(**_OPTS)
def sgns_epoch(tokens, sent_off, w_in, w_out, reduced, negatives, alphas, window):
    """One skip-gram negative-sampling pass over all sentences.

    ``reduced[i]`` is the effective window shrink for token ``i``;
    ``negatives`` is consumed left to right, ``alphas[i]`` is the learning
    rate at token ``i``. Returns the number of negatives consumed.
    """
    dim = w_in.shape[1]
    n_neg_per = 0 if negatives.shape[0] == 0 else negatives.shape[1]
    work = np.empty(dim, dtype=w_in.dtype)
    cursor = 0
    for s in range(sent_off.shape[0] - 1):
        lo = sent_off[s]
        hi = sent_off[s + 1]
        for i in range(lo, hi):
            center = tokens[i]
            if center < 0:
                continue
            alpha = alphas[i]
            b = reduced[i]
            start = max(lo, i - window + b)
            stop = min(hi, i + window + 1 - b)
            for j in range(start, stop):
                if j == i:
                    continue
                ctx = tokens[j]
                if ctx < 0:
                    continue
                # word2vec convention: the context vector is trained
                # against the center word and its negatives
                for d in range(dim):
                    work[d] = 0.0
                for k in range(n_neg_per + 1):
                    if k == 0:
                        target = center
                        label = 1.0
                    else:
                        target = negatives[cursor, k - 1]
                        if target == center:
                            continue
                        label = 0.0
                    f = 0.0
                    for d in range(dim):
                        f += w_in[ctx, d] * w_out[target, d]
                    if f > 6.0:
                        g = (label - 1.0) * alpha
                    elif f < -6.0:
                        g = label * alpha
                    else:
                        g = (label - 1.0 / (1.0 + np.exp(-f))) * alpha
                    for d in range(dim):
                        work[d] += g * w_out[target, d]
                        w_out[target, d] += g * w_in[ctx, d]
                for d in range(dim):
                    w_in[ctx, d] += work[d]
                cursor += 1
    return cursor
