"""CART tree growth (Gini) and forest voting.

Trees are flat arrays: ``feature`` (-1 marks a leaf), ``threshold``,
``left``/``right`` child ids local to the tree, and ``value`` (leaf label).
A sample goes left when ``x[feature] <= threshold``.

Bootstrap replication is expressed as integer sample weights. Split
candidates lie between distinct consecutive values of the node's samples
sorted on one feature; the score ``sum_c L_c^2 / W_L + sum_c R_c^2 / W_R``
(maximized) is equivalent to minimizing weighted child Gini. Class counts are
integers held in float64, so every backend computes bit-identical scores and
grows identical trees.

Per-node feature draws come from a splitmix64 stream seeded per tree; the
numba and numpy builders consume it in the same order.
"""
import numpy as np

from .._accel import njit

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)

_MASK = (1 << 64) - 1

# presorted columns cost O(n * d) memory and O(d) work per sample per level
PRESORT_MAX_FEATURES = 32


class SplitMix64:
    """Pure-Python twin of :func:`_splitmix_next`."""

    def __init__(self, seed):
        self.state = int(seed) & _MASK

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)


@njit(nogil=True, cache=True)
def _splitmix_next(state):
    state[0] += _GAMMA
    z = state[0]
    z = (z ^ (z >> _S30)) * _MUL1
    z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


def presort_columns(X):
    """Stable per-feature sort order of all rows, shared by every tree of a forest."""
    if X.shape[1] > PRESORT_MAX_FEATURES:
        return np.empty((0, 0), np.int64)
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


@njit(nogil=True, cache=True)
def build_tree_numba(X, y, w, n_classes, max_features, max_depth, min_leaf, seed, order):
    n, d = X.shape
    idx = np.flatnonzero(w > 0)
    m = idx.shape[0]
    cap = 2 * m + 1
    feature = np.full(cap, -1, np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    value = np.zeros(cap, np.int32)

    # filtering the forest-wide stable order keeps ties in row order, exactly
    # as a stable sort of the bagged rows would
    presort = order.shape[0] == d
    if presort:
        srt = np.empty((d, m), np.int64)
        for f in range(d):
            q = 0
            for s in order[f]:
                if w[s] > 0:
                    srt[f, q] = s
                    q += 1
    else:
        srt = np.empty((1, 1), np.int64)

    goes_left = np.zeros(n, np.bool_)
    buf = np.empty(m, np.int64)
    seg_ids = np.empty(m, np.int64)
    seg_vals = np.empty(m)
    tmp_vals = np.empty(m)
    perm_f = np.empty(d, np.int64)
    counts = np.zeros(n_classes)
    lc = np.zeros(n_classes)
    state = np.empty(1, np.uint64)
    state[0] = np.uint64(seed)

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    sp = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]

        counts[:] = 0.0
        total = 0.0
        for p in range(start, end):
            s = idx[p]
            counts[y[s]] += w[s]
            total += w[s]
        best_c = 0
        for c in range(1, n_classes):
            if counts[c] > counts[best_c]:
                best_c = c
        value[node] = best_c
        if counts[best_c] == total or total < 2 * min_leaf:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue

        cnt = end - start
        for f in range(d):
            perm_f[f] = f
        best_score = -1.0
        best_f = -1
        best_thr = 0.0
        visited = 0
        t = 0
        while t < d:
            j = t + np.int64(_splitmix_next(state) % np.uint64(d - t))
            tmp = perm_f[t]
            perm_f[t] = perm_f[j]
            perm_f[j] = tmp
            f = perm_f[t]
            t += 1
            if presort:
                for q in range(cnt):
                    s = srt[f, start + q]
                    seg_ids[q] = s
                    seg_vals[q] = X[s, f]
            else:
                for q in range(cnt):
                    tmp_vals[q] = X[idx[start + q], f]
                order = np.argsort(tmp_vals[:cnt], kind="mergesort")
                for q in range(cnt):
                    s = idx[start + order[q]]
                    seg_ids[q] = s
                    seg_vals[q] = tmp_vals[order[q]]
            if seg_vals[0] == seg_vals[cnt - 1]:
                continue
            visited += 1
            lc[:] = 0.0
            wl = 0.0
            for q in range(cnt - 1):
                s = seg_ids[q]
                lc[y[s]] += w[s]
                wl += w[s]
                if seg_vals[q] < seg_vals[q + 1]:
                    wr = total - wl
                    if wl >= min_leaf and wr >= min_leaf:
                        sl = 0.0
                        sr = 0.0
                        for c in range(n_classes):
                            a = lc[c]
                            b = counts[c] - a
                            sl += a * a
                            sr += b * b
                        score = sl / wl + sr / wr
                        if score > best_score:
                            best_score = score
                            best_f = f
                            lo = seg_vals[q]
                            hi = seg_vals[q + 1]
                            mid = (lo + hi) / 2.0
                            if mid >= hi:
                                mid = lo
                            best_thr = mid
            if visited >= max_features and best_f >= 0:
                break
        if best_f < 0:
            continue

        nl = 0
        for p in range(start, end):
            s = idx[p]
            goes_left[s] = X[s, best_f] <= best_thr
            if goes_left[s]:
                nl += 1
        # stable partition of the node's sample list(s)
        a = 0
        b = nl
        for p in range(start, end):
            s = idx[p]
            if goes_left[s]:
                buf[a] = s
                a += 1
            else:
                buf[b] = s
                b += 1
        for q in range(cnt):
            idx[start + q] = buf[q]
        if presort:
            for f in range(d):
                a = 0
                b = nl
                for p in range(start, end):
                    s = srt[f, p]
                    if goes_left[s]:
                        buf[a] = s
                        a += 1
                    else:
                        buf[b] = s
                        b += 1
                for q in range(cnt):
                    srt[f, start + q] = buf[q]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        st_node[sp] = rid
        st_start[sp] = start + nl
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = lid
        st_start[sp] = start
        st_end[sp] = start + nl
        st_depth[sp] = depth + 1
        sp += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


def build_tree_numpy(X, y, w, n_classes, max_features, max_depth, min_leaf, seed):
    """Vectorized-per-node twin of :func:`build_tree_numba` (same trees)."""
    n, d = X.shape
    idx = np.flatnonzero(w > 0)
    wf = w.astype(np.float64)
    feature, threshold, left, right, value = [-1], [0.0], [-1], [-1], [0]
    rng = SplitMix64(seed)
    stack = [(0, idx, 0)]
    while stack:
        node, seg, depth = stack.pop()
        ys = y[seg]
        ws = wf[seg]
        counts = np.bincount(ys, weights=ws, minlength=n_classes)
        total = counts.sum()
        value[node] = int(np.argmax(counts))
        if counts[value[node]] == total or total < 2 * min_leaf:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue

        perm_f = list(range(d))
        best = (-1.0, -1, 0.0)
        visited = 0
        for t in range(d):
            j = t + rng.next() % (d - t)
            perm_f[t], perm_f[j] = perm_f[j], perm_f[t]
            f = perm_f[t]
            vals = X[seg, f]
            order = np.argsort(vals, kind="stable")
            sv = vals[order]
            if sv[0] == sv[-1]:
                continue
            visited += 1
            onehot = np.zeros((seg.size, n_classes))
            onehot[np.arange(seg.size), ys[order]] = ws[order]
            lcum = np.cumsum(onehot, axis=0)[:-1]
            wl = np.cumsum(ws[order])[:-1]
            wr = total - wl
            ok = (sv[:-1] < sv[1:]) & (wl >= min_leaf) & (wr >= min_leaf)
            if ok.any():
                rcum = counts - lcum
                with np.errstate(divide="ignore", invalid="ignore"):
                    score = (lcum * lcum).sum(axis=1) / wl + (rcum * rcum).sum(axis=1) / wr
                score = np.where(ok, score, -np.inf)
                q = int(np.argmax(score))
                if score[q] > best[0]:
                    lo, hi = sv[q], sv[q + 1]
                    mid = (lo + hi) / 2.0
                    if mid >= hi:
                        mid = lo
                    best = (float(score[q]), f, float(mid))
            if visited >= max_features and best[1] >= 0:
                break
        _, bf, bt = best
        if bf < 0:
            continue
        go = X[seg, bf] <= bt
        lid, rid = len(feature), len(feature) + 1
        feature += [-1, -1]
        threshold += [0.0, 0.0]
        left += [-1, -1]
        right += [-1, -1]
        value += [0, 0]
        feature[node], threshold[node], left[node], right[node] = bf, bt, lid, rid
        stack.append((rid, seg[~go], depth + 1))
        stack.append((lid, seg[go], depth + 1))
    return (np.asarray(feature, np.int32), np.asarray(threshold), np.asarray(left, np.int32),
            np.asarray(right, np.int32), np.asarray(value, np.int32))


@njit(nogil=True, cache=True)
def predict_forest_numba(X, feature, threshold, left, right, value, offsets, n_classes):
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    votes = np.zeros((n, n_classes), np.int64)
    # tree-major order keeps one tree's nodes in cache while all rows pass through it
    for t in range(n_trees):
        base = offsets[t]
        for i in range(n):
            node = base
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = base + left[node]
                else:
                    node = base + right[node]
            votes[i, value[node]] += 1
    out = np.empty(n, np.int64)
    for i in range(n):
        best = 0
        for c in range(1, n_classes):
            if votes[i, c] > votes[i, best]:
                best = c
        out[i] = best
    return out


def tree_apply_numpy(X, feature, threshold, left, right, value):
    """Leaf labels of one tree for every row of ``X``."""
    node = np.zeros(X.shape[0], dtype=np.int64)
    active = np.flatnonzero(feature[node] >= 0)
    while active.size:
        nd = node[active]
        f = feature[nd]
        go_left = X[active, f] <= threshold[nd]
        node[active] = np.where(go_left, left[nd], right[nd])
        active = active[feature[node[active]] >= 0]
    return value[node].astype(np.int64)


def predict_forest_numpy(X, feature, threshold, left, right, value, offsets, n_classes):
    votes = np.zeros((X.shape[0], n_classes), dtype=np.int64)
    rows = np.arange(X.shape[0])
    for t in range(offsets.shape[0] - 1):
        sl = slice(offsets[t], offsets[t + 1])
        lab = tree_apply_numpy(X, feature[sl], threshold[sl], left[sl], right[sl], value[sl])
        votes[rows, lab] += 1
    return np.argmax(votes, axis=1).astype(np.int64)
