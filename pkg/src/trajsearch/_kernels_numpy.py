"""Pure-numpy twins of the ``_kernels_numba`` kernels.

Same signatures, same results. Loops that are inherently sequential
(greedy order check, SGD) stay Python loops; everything else is batched.
"""

from itertools import combinations as _position_combinations

import numpy as np


def _row(a, rel_off, rel_tgt):
    if a < 0 or a + 1 >= rel_off.shape[0]:
        return rel_tgt[:0]
    return rel_tgt[rel_off[a]:rel_off[a + 1]]


def _match_vector(a, t, exact, rel_off, rel_tgt):
    hit = t == a
    if not exact:
        hit |= np.isin(t, _row(a, rel_off, rel_tgt))
    return hit


def lcss_length(q, t, exact, rel_off, rel_tgt):
    # Row update as a running maximum: M[i][j-1] <= M[i-1][j-1] + 1 for any
    # match relation, so the diagonal case never loses to the left neighbour.
    n = t.shape[0]
    if q.shape[0] == 0 or n == 0:
        return 0
    prev = np.zeros(n + 1, dtype=np.int32)
    for a in q:
        hit = _match_vector(a, t, exact, rel_off, rel_tgt)
        cand = np.where(hit, prev[:-1] + 1, prev[1:])
        prev = np.concatenate(([0], np.maximum.accumulate(cand))).astype(np.int32)
    return int(prev[n])


def baseline_scan(q, p, t_off, t_pois, exact, rel_off, rel_tgt):
    n_traj = t_off.shape[0] - 1
    if n_traj == 0:
        return np.zeros(0, dtype=np.int32)
    lengths = np.diff(t_off)
    width = int(lengths.max()) if n_traj else 0
    if q.shape[0] == 0 or width == 0:
        return np.flatnonzero(np.zeros(n_traj, bool) | (p <= 0)).astype(np.int32)
    # right-aligned padding keeps every row's last column meaningful
    pad = np.full((n_traj, width), -2, dtype=np.int64)
    rows = np.repeat(np.arange(n_traj), lengths)
    cols = np.arange(t_pois.shape[0]) - np.repeat(t_off[:-1], lengths) + np.repeat(width - lengths, lengths)
    pad[rows, cols] = t_pois
    prev = np.zeros((n_traj, width + 1), dtype=np.int32)
    for a in q:
        hit = pad == a
        if not exact:
            hit |= np.isin(pad, _row(a, rel_off, rel_tgt))
        cand = np.where(hit, prev[:, :-1] + 1, prev[:, 1:])
        prev[:, 1:] = np.maximum.accumulate(cand, axis=1)
    return np.flatnonzero(prev[:, width] >= p).astype(np.int32)


def same_order(c, combi, exact, rel_off, rel_tgt):
    nk = len(combi)
    if nk == 0:
        return True
    cl = c.tolist() if hasattr(c, "tolist") else list(c)
    kl = combi.tolist() if hasattr(combi, "tolist") else list(combi)
    j = 0
    if exact:
        for x in cl:
            if x == kl[j]:
                j += 1
                if j == nk:
                    return True
        return False
    rows = {}
    for x in cl:
        a = kl[j]
        if x == a:
            j += 1
        else:
            row = rows.get(a)
            if row is None:
                row = rows[a] = set(_row(a, rel_off, rel_tgt).tolist())
            if x in row:
                j += 1
        if j == nk:
            return True
    return False


def intersect_sorted(a, b):
    return np.intersect1d(a, b, assume_unique=True)


def _canonical_combinations(q, p):
    ql = q.tolist()
    prev = []
    for i, x in enumerate(ql):
        j = i - 1
        while j >= 0 and ql[j] != x:
            j -= 1
        prev.append(j)
    for pos in _position_combinations(range(len(ql)), p):
        last = -1
        ok = True
        for k in pos:
            if prev[k] > last:
                ok = False
                break
            last = k
        if ok:
            yield pos


DIRECT_VERIFY = 8


def _verify(lists, combi, t_off, t_pois, admitted, result, counters, exact, rel_off, rel_tgt):
    lists.sort(key=len)
    if len(lists[0]) == 0:
        return
    cand = lists[0]
    if len(lists) == 1:
        for c in cand.tolist():
            if c not in admitted:
                admitted.add(c)
                counters[2] += 1
                result.append(c)
        return
    cand = np.intersect1d(cand, lists[1], assume_unique=True)
    for other in lists[2:]:
        if cand.shape[0] <= DIRECT_VERIFY:
            break
        cand = np.intersect1d(cand, other, assume_unique=True)
    for c in cand.tolist():
        if c in admitted:
            continue
        counters[1] += 1
        if same_order(t_pois[t_off[c]:t_off[c + 1]], combi, exact, rel_off, rel_tgt):
            admitted.add(c)
            counters[2] += 1
            result.append(c)


def search_single(q, p, idx_off, idx_ids, t_off, t_pois, exact, rel_off, rel_tgt):
    n = q.shape[0]
    n_keys = idx_off.shape[0] - 1
    counters = np.zeros(3, dtype=np.int64)
    if p < 1 or p > n or t_off.shape[0] <= 1:
        return np.zeros(0, dtype=np.int32), counters
    empty = idx_ids[:0]
    admitted, result = set(), []
    for pos in _canonical_combinations(q, p):
        counters[0] += 1
        combi = q[list(pos)]
        lists = [idx_ids[idx_off[x]:idx_off[x + 1]] if 0 <= x < n_keys else empty
                 for x in combi.tolist()]
        _verify(lists, combi, t_off, t_pois, admitted, result, counters, exact, rel_off, rel_tgt)
    return np.sort(np.asarray(result, dtype=np.int32)), counters


def build_pair_table(pair_keys):
    # numpy lookups go through searchsorted on the sorted keys
    return np.zeros(0, dtype=np.int64)


def search_pairs(q, p, n_pois, pair_keys, pair_table, pair_off, pair_ids, t_off, t_pois):
    n = q.shape[0]
    counters = np.zeros(3, dtype=np.int64)
    if p < 2 or p > n or t_off.shape[0] <= 1:
        return np.zeros(0, dtype=np.int32), counters
    empty = pair_ids[:0]
    no_rel = np.zeros(1, dtype=np.int64)
    no_tgt = np.zeros(0, dtype=np.int32)
    admitted, result = set(), []
    for pos in _canonical_combinations(q, p):
        counters[0] += 1
        combi = q[list(pos)]
        lists = []
        cl = combi.tolist()
        for x, y in zip(cl, cl[1:]):
            r = -1
            if 0 <= x < n_pois and 0 <= y < n_pois:
                key = x * n_pois + y
                r = int(np.searchsorted(pair_keys, key))
                if r >= pair_keys.shape[0] or pair_keys[r] != key:
                    r = -1
            lists.append(empty if r < 0 else pair_ids[pair_off[r]:pair_off[r + 1]])
        _verify(lists, combi, t_off, t_pois, admitted, result, counters, True, no_rel, no_tgt)
    return np.sort(np.asarray(result, dtype=np.int32)), counters


def _sgns_gradient(f, labels):
    sig = 1.0 / (1.0 + np.exp(-np.clip(f, -6.0, 6.0)))
    return np.where(f > 6.0, labels - 1.0, np.where(f < -6.0, labels, labels - sig))


def sgns_epoch(tokens, sent_off, w_in, w_out, reduced, negatives, alphas, window):
    n_neg_per = 0 if negatives.shape[0] == 0 else negatives.shape[1]
    cursor = 0
    tok = tokens.tolist()
    for s in range(sent_off.shape[0] - 1):
        lo, hi = int(sent_off[s]), int(sent_off[s + 1])
        for i in range(lo, hi):
            center = tok[i]
            if center < 0:
                continue
            alpha = alphas[i]
            b = int(reduced[i])
            for j in range(max(lo, i - window + b), min(hi, i + window + 1 - b)):
                if j == i or tok[j] < 0:
                    continue
                ctx = tok[j]
                if n_neg_per:
                    negs = negatives[cursor]
                    targets = np.concatenate(([center], negs[negs != center]))
                else:
                    targets = np.array([center])
                l1 = w_in[ctx]
                labels = np.zeros(targets.shape[0])
                labels[0] = 1.0
                if np.unique(targets).shape[0] == targets.shape[0]:
                    out_rows = w_out[targets]
                    g = _sgns_gradient(out_rows @ l1, labels) * alpha
                    work = g @ out_rows
                    w_out[targets] += np.outer(g, l1)
                else:
                    # a repeated negative sees its own earlier update
                    work = np.zeros_like(l1)
                    for k in range(targets.shape[0]):
                        row = w_out[targets[k]]
                        g = _sgns_gradient(np.array([row @ l1]), labels[k:k + 1])[0] * alpha
                        work += g * row
                        row += g * l1
                w_in[ctx] += work
                cursor += 1
    return cursor
