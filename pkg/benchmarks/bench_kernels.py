"""Time every hot kernel on its numba and numpy paths and check they agree.

    python3 benchmarks/bench_kernels.py [--repeat N] [--quick]

Both implementations are called directly, so ``ORCA_DISABLE_NUMBA`` does not
matter here. Compilation happens in a warm-up call and is not timed.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from orca.forest import balanced_weights, draw_tree
from orca.kernels import backtest as kb
from orca.kernels import jacobi as kj
from orca.kernels import ranks as kr
from orca.kernels import tree as kt
from orca.strategy import parameter_grid


def best_of(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b, equal_nan=a.dtype.kind == "f")
    return a == b


def cases(quick: bool):
    rng = np.random.default_rng(0)

    x = rng.standard_normal((120, 24))
    c = np.corrcoef(x, rowvar=False)
    sched = kj.round_robin_schedule(24)
    yield ("jacobi 24x24",
           lambda: kj._jacobi_numba(c.copy(), sched, kj.TOL, kj.MAX_SWEEPS),
           lambda: kj._jacobi_numpy(c.copy(), sched, kj.TOL, kj.MAX_SWEEPS), "close")

    s = rng.standard_normal(2500)
    yield ("trailing rank 2500/126",
           lambda: kr._trailing_rank_numba(s, 126), lambda: kr._trailing_rank_numpy(s, 126), "equal")

    n, d, depth = 756, 250, 6
    xt = np.ascontiguousarray(rng.standard_normal((d, n)))
    y = (rng.random(n) < 0.1).astype(np.int64)
    max_nodes = kt.max_nodes_for_depth(depth)
    mult, draws = draw_tree(np.random.default_rng(1), n, d, int(np.ceil(np.sqrt(d))), max_nodes)
    cw = balanced_weights(np.repeat(y, mult))
    order = kt.presort(xt)
    args = (xt, y, mult.astype(np.int64), order, cw, np.ascontiguousarray(draws), depth, 30, 60)
    yield ("tree 756x250 depth 6", lambda: kt._grow_numba(*args), lambda: kt._grow_numpy(*args),
           "equal")

    n_trees = 50 if quick else 200
    feat, thr, left, right, val = forest_arrays(xt, y, order, n_trees, depth, max_nodes)
    xq = rng.standard_normal((126, d))
    yield (f"predict {n_trees} trees x 126 rows",
           lambda: kt._predict_numba(xq, feat, thr, left, right, val),
           lambda: kt._predict_numpy(xq, feat, thr, left, right, val), "equal")

    m = 1100
    rr, rc = rng.random(m), rng.random(m)
    req, rdef = rng.normal(3e-4, 0.01, m), rng.normal(1e-4, 0.004, m)
    grid = parameter_grid()
    if quick:
        grid = grid[::20]
    gargs = (rr, rc, req, rdef, grid, int(0.55 * m), 0.04 / 252, 5e-4, 0.005 / 252)
    yield (f"grid Sharpe {grid.shape[0]} sets x {int(0.55 * m)} days",
           lambda: kb._grid_sharpe_numba(*gargs), lambda: kb._grid_sharpe_numpy(*gargs), "equal")
    yield ("exposure paths 20 sets",
           lambda: kb._paths_numba(rr, rc, grid[:20]), lambda: kb._paths_numpy(rr, rc, grid[:20]),
           "equal")


def forest_arrays(xt, y, order, n_trees, depth, max_nodes):
    d, n = xt.shape
    shape = (n_trees, max_nodes)
    feat = np.full(shape, -1, dtype=np.int64)
    left = np.zeros(shape, dtype=np.int64)
    right = np.zeros(shape, dtype=np.int64)
    thr = np.zeros(shape)
    val = np.zeros(shape)
    for t in range(n_trees):
        mult, draws = draw_tree(np.random.default_rng(100 + t), n, d,
                                int(np.ceil(np.sqrt(d))), max_nodes)
        cw = balanced_weights(np.repeat(y, mult))
        f, th, lf, rt, v, _, _ = kt._grow_numba(xt, y, mult.astype(np.int64), order, cw,
                                                np.ascontiguousarray(draws), depth, 30, 60)
        feat[t], thr[t], left[t], right[t], val[t] = f, th, lf, rt, v
    return feat, thr, left, right, val


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller forest and grid")
    args = ap.parse_args(argv)

    print(f"{'kernel':36s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}  agree")
    for name, fast, slow, mode in cases(args.quick):
        fast()  # compile
        t_fast, a = best_of(fast, args.repeat)
        t_slow, b = best_of(slow, max(1, args.repeat // 2))
        if mode == "equal":
            ok = same(a, b)
        else:
            ok = np.allclose(np.sort(a[0]), np.sort(b[0]), atol=1e-10)
        print(f"{name:36s} {t_fast * 1e3:10.3f} {t_slow * 1e3:10.3f} "
              f"{t_slow / t_fast:7.1f}x  {'yes' if ok else 'NO'}")


if __name__ == "__main__":
    main()
