"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is called once untimed (to trigger compilation or load the
cache), then timed over ``--repeat`` calls; the best time is reported.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from efslstm import kernels
from efslstm.forest import RandomForestRegressor
from efslstm.lstm import convert, weight_count


def _best(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    q, u, rows = 36, 2, 800
    p = convert(rng.uniform(-5, 5, weight_count(q, u)), q, u).stacked()
    mask = rng.random(q) < 0.5
    X = rng.random((rows, q))
    y = rng.random(rows)
    starts = np.arange(0, rows + 1, rows // 5, dtype=np.int64)
    yield "lstm_partition_sse (800x36, u=2, n=5)", "lstm_partition_sse", (*p, mask, X, y, starts)

    F = rng.random((100, 5))
    yield "domination_matrix (100 pts, 5 obj)", "domination_matrix", (F,)

    Xs = rng.random((800, 30))
    ys = Xs[:, 3] + 0.1 * rng.standard_normal(800)
    yield "best_split (800x30, all features)", "best_split", (Xs, ys, np.arange(30, dtype=np.int64), 5)

    rf = RandomForestRegressor(n_trees=100, seed=0).fit(Xs[:, :20], ys)
    Xp = np.ascontiguousarray(Xs[:, :20])
    yield ("forest_predict (100 trees, 800 rows)", "forest_predict",
           (rf._roots, rf._feature, rf._threshold, rf._left, rf._right, rf._value, Xp))

    P = rng.random((400, 5))
    nondominated = ~kernels.domination_matrix_numpy(P).any(axis=0)
    front = P[nondominated][:40]
    yield "hv_sweep (40 pts, 5 obj)", "hv_sweep", (np.ascontiguousarray(front), np.ones(5))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not kernels.HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<42} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for label, name, fargs in cases(rng):
        t_np = _best(getattr(kernels, f"{name}_numpy"), fargs, args.repeat)
        t_nb = _best(getattr(kernels, f"{name}_numba"), fargs, args.repeat)
        print(f"{label:<42} {1e3 * t_np:>10.3f} {1e3 * t_nb:>10.3f} {t_np / t_nb:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
