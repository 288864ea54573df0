"""Compare the numba kernels with their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 3] [--n 2000]

Both backends are called in-process through their ``use_numba`` switches, so
the numbers exclude import time. The first numba call is timed separately as
compile time. Results must agree exactly; the script aborts if they do not.
"""
import argparse
import time

import numpy as np

from mscr.classifiers.forest import fit_forest
from mscr.separation import separation_arrays


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_separation(n, d, repeat):
    rng = np.random.default_rng(0)
    X = rng.random((n, d))
    y = rng.integers(0, 4, n)
    rows = []
    for norm in ("linf", "l2"):
        t0 = time.perf_counter()
        separation_arrays(X[:50], y[:50], norm, use_numba=True)
        compile_s = time.perf_counter() - t0
        t_nb, a = best_of(lambda: separation_arrays(X, y, norm, use_numba=True), repeat)
        t_np, b = best_of(lambda: separation_arrays(X, y, norm, use_numba=False), repeat)
        assert (a.two_r, a.witness) == (b.two_r, b.witness)
        rows.append((f"separation {norm} n={n} d={d}", compile_s, t_nb, t_np))
    return rows


def bench_forest(n, trees, repeat):
    rng = np.random.default_rng(1)
    X = rng.random((n, 2))
    y = (X[:, 0] + 0.2 * rng.normal(size=n) > X[:, 1]).astype(np.int64)
    probe = rng.random((10 * n, 2))
    t0 = time.perf_counter()
    fit_forest(X[:50], y[:50], 2, n_trees=1, seed=0, use_numba=True).predict(probe[:5], use_numba=True)
    compile_s = time.perf_counter() - t0
    t_nb, fa = best_of(lambda: fit_forest(X, y, 2, n_trees=trees, seed=3, use_numba=True), repeat)
    t_np, fb = best_of(lambda: fit_forest(X, y, 2, n_trees=trees, seed=3, use_numba=False), repeat)
    for k, v in fa.arrays().items():
        assert np.array_equal(v, fb.arrays()[k]), k
    p_nb, pa = best_of(lambda: fa.predict(probe, use_numba=True), repeat)
    p_np, pb = best_of(lambda: fa.predict(probe, use_numba=False), repeat)
    assert np.array_equal(pa, pb)
    return [(f"forest fit n={n} trees={trees}", compile_s, t_nb, t_np),
            (f"forest predict {len(probe)} pts", 0.0, p_nb, p_np)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--d", type=int, default=16)
    ap.add_argument("--trees", type=int, default=20)
    args = ap.parse_args()
    rows = bench_separation(args.n, args.d, args.repeat) + bench_forest(args.n, args.trees, args.repeat)
    print(f"{'kernel':34s} {'compile s':>10s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, c, nb, npy in rows:
        print(f"{name:34s} {c:10.3f} {nb:10.4f} {npy:10.4f} {npy / nb:8.1f}x")


if __name__ == "__main__":
    main()
