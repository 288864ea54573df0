"""Pruned bichromatic closest-pair scan.

Points are grouped by class; every pair of classes is cut into tiles of
``TILE_ROWS`` rows of the first class against the whole second class, and the
second class is walked in chunks of ``TILE_COLS`` rows so a chunk stays hot in
cache while the tile's rows sweep over it.

Per pair the distance is accumulated coordinate by coordinate and abandoned as
soon as the partial value exceeds the running bound (max gap for Linf, partial
sum of squares against the squared bound for L2). Abandoning only on a strict
excess keeps exact ties alive so the lexicographic witness rule is honoured no
matter which worker found the bound. L2 values stay squared until the end.

The bound is a one-element array shared by all workers; it only ever holds a
real pair distance, so stale reads cost pruning efficiency, never correctness.
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .._accel import njit

TILE_ROWS = 32
TILE_COLS = 256


def class_layout(labels):
    """Stable class-sorted permutation and ``(class, start, stop)`` runs."""
    labels = np.asarray(labels)
    perm = np.argsort(labels, kind="stable").astype(np.int64)
    sorted_labels = labels[perm]
    cuts = np.flatnonzero(np.diff(sorted_labels)) + 1
    starts = np.concatenate([[0], cuts])
    stops = np.concatenate([cuts, [labels.shape[0]]])
    runs = [(int(sorted_labels[s]), int(s), int(e)) for s, e in zip(starts, stops)]
    return perm, runs


def make_tiles(runs, tile_rows=TILE_ROWS):
    """Rows ``(a0, a1, b0, b1)`` in permuted index space, one per tile."""
    tiles = []
    for ia in range(len(runs)):
        _, a_start, a_stop = runs[ia]
        for ib in range(ia + 1, len(runs)):
            _, b_start, b_stop = runs[ib]
            for a0 in range(a_start, a_stop, tile_rows):
                tiles.append((a0, min(a0 + tile_rows, a_stop), b_start, b_stop))
    return np.asarray(tiles, dtype=np.int64).reshape(-1, 4)


def total_pairs(runs):
    sizes = np.asarray([e - s for _, s, e in runs], dtype=np.int64)
    return int((sizes.sum() ** 2 - (sizes ** 2).sum()) // 2)


def heuristic_bound(X, labels, l2, window=4, chunk=4096):
    """Cheap upper bound on the separation from neighbours along a 1-D projection.

    The returned value is the (squared, for L2) distance of a real inter-class
    pair, so it is safe to seed the pruning bound with it.
    """
    n = X.shape[0]
    proj = np.zeros(n)
    for c0 in range(0, X.shape[1], 256):
        proj += X[:, c0:c0 + 256].sum(axis=1, dtype=np.float64)
    order = np.argsort(proj, kind="stable")
    best = np.inf
    for off in range(1, min(window, n - 1) + 1):
        a = order[:-off]
        b = order[off:]
        keep = labels[a] != labels[b]
        a, b = a[keep], b[keep]
        for s in range(0, a.size, chunk):
            diff = X[a[s:s + chunk]].astype(np.float64) - X[b[s:s + chunk]].astype(np.float64)
            if l2:
                vals = np.cumsum(diff * diff, axis=1)[:, -1]
            else:
                vals = np.abs(diff).max(axis=1)
            if vals.size:
                best = min(best, float(vals.min()))
    return best


@njit(nogil=True, cache=True)
def scan_tiles_numba(X, perm, tiles, tile_ids, l2, bound,
                     best_val, best_i, best_j, examined, pruned):
    d = X.shape[1]
    for k in range(tile_ids.shape[0]):
        t = tile_ids[k]
        a0 = tiles[t, 0]
        a1 = tiles[t, 1]
        b0 = tiles[t, 2]
        b1 = tiles[t, 3]
        lv = np.inf
        li = -1
        lj = -1
        ex = 0
        pr = 0
        for jb in range(b0, b1, TILE_COLS):
            je = min(jb + TILE_COLS, b1)
            for ia in range(a0, a1):
                i = perm[ia]
                for jj in range(jb, je):
                    j = perm[jj]
                    lim = bound[0]
                    if lv < lim:
                        lim = lv
                    acc = 0.0
                    dropped = False
                    if l2:
                        for c in range(d):
                            diff = np.float64(X[i, c]) - np.float64(X[j, c])
                            acc += diff * diff
                            if acc > lim:
                                dropped = True
                                break
                    else:
                        for c in range(d):
                            g = abs(np.float64(X[i, c]) - np.float64(X[j, c]))
                            if g > acc:
                                acc = g
                                if acc > lim:
                                    dropped = True
                                    break
                    if dropped:
                        pr += 1
                        continue
                    ex += 1
                    lo = i if i < j else j
                    hi = j if i < j else i
                    if acc < lv or (acc == lv and (lo < li or (lo == li and hi < lj))):
                        lv = acc
                        li = lo
                        lj = hi
                        if acc < bound[0]:
                            bound[0] = acc
        best_val[t] = lv
        best_i[t] = li
        best_j[t] = lj
        examined[t] = ex
        pruned[t] = pr


def scan_tiles_numpy(X, perm, tiles, tile_ids, l2, bound,
                     best_val, best_i, best_j, examined, pruned, max_block=1 << 20):
    """Vectorized twin of :func:`scan_tiles_numba`.

    Pairs of a tile are evaluated together and the surviving set shrinks after
    every coordinate; the bound is refreshed per tile.
    """
    d = X.shape[1]
    for t in tile_ids:
        a0, a1, b0, b1 = (int(v) for v in tiles[t])
        rows = perm[a0:a1]
        lv, li, lj, ex, pr = np.inf, -1, -1, 0, 0
        step = max(1, max_block // max(1, a1 - a0))
        for jb in range(b0, b1, step):
            cols = perm[jb:min(jb + step, b1)]
            lim = min(bound[0], lv)
            ii = np.repeat(rows, cols.size)
            jj = np.tile(cols, rows.size)
            acc = np.zeros(ii.size)
            alive = np.arange(ii.size)
            for c in range(d):
                if alive.size == 0:
                    break
                diff = X[ii[alive], c].astype(np.float64) - X[jj[alive], c].astype(np.float64)
                if l2:
                    vals = acc[alive] + diff * diff
                else:
                    vals = np.maximum(acc[alive], np.abs(diff))
                acc[alive] = vals
                alive = alive[vals <= lim]
            pr += ii.size - alive.size
            ex += alive.size
            if alive.size:
                lo = np.minimum(ii[alive], jj[alive])
                hi = np.maximum(ii[alive], jj[alive])
                pick = np.lexsort((hi, lo, acc[alive]))[0]
                cand = (acc[alive][pick], lo[pick], hi[pick])
                if cand < (lv, li, lj):
                    lv, li, lj = float(cand[0]), int(cand[1]), int(cand[2])
                    bound[0] = min(bound[0], lv)
        best_val[t], best_i[t], best_j[t] = lv, li, lj
        examined[t], pruned[t] = ex, pr


def scan(X, labels, l2, threads=1, use_numba=True, initial_bound=None):
    """Exact minimum inter-class (squared for L2) distance.

    Returns ``(value, i, j, examined, pruned)`` with ``i < j`` the
    lexicographically smallest witness among exact ties.
    """
    labels = np.asarray(labels)
    perm, runs = class_layout(labels)
    tiles = make_tiles(runs)
    n_tiles = tiles.shape[0]
    bound = np.array([np.inf if initial_bound is None else float(initial_bound)])
    best_val = np.full(n_tiles, np.inf)
    best_i = np.full(n_tiles, -1, dtype=np.int64)
    best_j = np.full(n_tiles, -1, dtype=np.int64)
    examined = np.zeros(n_tiles, dtype=np.int64)
    pruned = np.zeros(n_tiles, dtype=np.int64)
    kernel = scan_tiles_numba if use_numba else scan_tiles_numpy
    args = (X, perm, tiles)
    outs = (bound, best_val, best_i, best_j, examined, pruned)

    threads = max(1, int(threads or 1))
    ids = np.arange(n_tiles, dtype=np.int64)
    if threads == 1 or n_tiles < 2:
        kernel(*args, ids, bool(l2), *outs)
    else:
        chunks = [ids[w::threads] for w in range(threads)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(kernel, *args, ch, bool(l2), *outs) for ch in chunks if ch.size]
            for f in futures:
                f.result()

    found = best_i >= 0
    if not found.any():
        return np.inf, -1, -1, int(examined.sum()), int(pruned.sum())
    v, i, j = best_val[found], best_i[found], best_j[found]
    k = np.lexsort((j, i, v))[0]
    return float(v[k]), int(i[k]), int(j[k]), int(examined.sum()), int(pruned.sum())
