"""CART growth and forest prediction for binary class-weighted Gini trees.

Trees are stored as flat arrays indexed by node slot; slots are allocated in
breadth-first creation order so ``2 ** (max_depth + 1) - 1`` slots always
suffice. A node is a leaf when ``feature[node] == -1``.

Split quality is ranked with the Gini proxy

    (wL0**2 + wL1**2) / WL + (wR0**2 + wR1**2) / WR

(maximising it minimises weighted child impurity). Weighted class totals are
formed as integer count times class weight so both backends reproduce the
same floating point values and therefore the same trees.
"""
from __future__ import annotations

import numpy as np

from .._accel import USE_NUMBA, njit


def max_nodes_for_depth(max_depth: int) -> int:
    return 2 ** (max_depth + 1) - 1


@njit
def _grow_numba(xt, y, mult, order, cw, draws, max_depth, min_leaf, min_split):
    max_nodes = draws.shape[0]
    mtry = draws.shape[1]
    n = y.shape[0]
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes)
    count = np.zeros(max_nodes, dtype=np.int64)
    node_n0 = np.zeros(max_nodes, dtype=np.int64)
    node_n1 = np.zeros(max_nodes, dtype=np.int64)
    node_depth = np.zeros(max_nodes, dtype=np.int64)
    cw0 = cw[0]
    cw1 = cw[1]

    node_of = np.full(n, -1, dtype=np.int64)
    for r in range(n):
        if mult[r] > 0:
            node_of[r] = 0
            if y[r] == 1:
                node_n1[0] += mult[r]
            else:
                node_n0[0] += mult[r]

    n_nodes = 1
    head = 0
    while head < n_nodes:
        node = head
        head += 1
        depth = node_depth[node]
        n0 = node_n0[node]
        n1 = node_n1[node]
        cnt = n0 + n1
        w0 = n0 * cw0
        w1 = n1 * cw1
        value[node] = w1 / (w0 + w1)
        count[node] = cnt
        if depth >= max_depth or cnt < min_split or n0 == 0 or n1 == 0:
            continue

        best = -1.0
        best_f = -1
        best_thr = 0.0
        best_l0 = 0
        best_l1 = 0
        for j in range(mtry):
            f = draws[node, j]
            l0 = 0
            l1 = 0
            prev = 0.0
            started = False
            for k in range(n):
                r = order[f, k]
                if node_of[r] != node:
                    continue
                v = xt[f, r]
                if started and prev < v:
                    nl = l0 + l1
                    if cnt - nl < min_leaf:
                        break
                    if nl >= min_leaf:
                        a0 = l0 * cw0
                        a1 = l1 * cw1
                        b0 = (n0 - l0) * cw0
                        b1 = (n1 - l1) * cw1
                        proxy = (a0 * a0 + a1 * a1) / (a0 + a1) + (b0 * b0 + b1 * b1) / (b0 + b1)
                        if proxy > best:
                            best = proxy
                            best_f = f
                            mid = (prev + v) / 2.0
                            if not mid < v:
                                mid = prev
                            best_thr = mid
                            best_l0 = l0
                            best_l1 = l1
                if y[r] == 1:
                    l1 += mult[r]
                else:
                    l0 += mult[r]
                prev = v
                started = True
        if best_f < 0:
            continue

        lc = n_nodes
        rc = n_nodes + 1
        for r in range(n):
            if node_of[r] == node:
                if xt[best_f, r] <= best_thr:
                    node_of[r] = lc
                else:
                    node_of[r] = rc
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lc
        right[node] = rc
        node_n0[lc] = best_l0
        node_n1[lc] = best_l1
        node_n0[rc] = n0 - best_l0
        node_n1[rc] = n1 - best_l1
        node_depth[lc] = depth + 1
        node_depth[rc] = depth + 1
        n_nodes += 2
    return feature, threshold, left, right, value, count, n_nodes


def _grow_numpy(xt, y, mult, order, cw, draws, max_depth, min_leaf, min_split):
    max_nodes = draws.shape[0]
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes)
    count = np.zeros(max_nodes, dtype=np.int64)
    cw0, cw1 = float(cw[0]), float(cw[1])

    queue = [(0, np.repeat(np.arange(y.shape[0]), mult), 0)]
    n_nodes = 1
    head = 0
    while head < len(queue):
        node, idx, depth = queue[head]
        head += 1
        cnt = idx.shape[0]
        ynode = y[idx]
        n1 = int(ynode.sum())
        n0 = cnt - n1
        w0 = n0 * cw0
        w1 = n1 * cw1
        value[node] = w1 / (w0 + w1)
        count[node] = cnt
        if depth >= max_depth or cnt < min_split or n0 == 0 or n1 == 0:
            continue

        nl = np.arange(1, cnt)
        ok_size = (nl >= min_leaf) & (cnt - nl >= min_leaf)
        if not ok_size.any():
            continue
        best = -1.0
        best_f = -1
        best_thr = 0.0
        for f in draws[node]:
            vals = xt[f, idx]
            order = np.argsort(vals, kind="stable")
            sv = vals[order]
            l1 = np.cumsum(ynode[order])[:-1]
            l0 = nl - l1
            valid = ok_size & (sv[:-1] < sv[1:])
            if not valid.any():
                continue
            a0 = l0 * cw0
            a1 = l1 * cw1
            b0 = (n0 - l0) * cw0
            b1 = (n1 - l1) * cw1
            with np.errstate(invalid="ignore", divide="ignore"):
                proxy = (a0 * a0 + a1 * a1) / (a0 + a1) + (b0 * b0 + b1 * b1) / (b0 + b1)
            proxy = np.where(valid, proxy, -np.inf)
            k = int(np.argmax(proxy))
            if proxy[k] > best:
                best = float(proxy[k])
                best_f = int(f)
                mid = (sv[k] + sv[k + 1]) / 2.0
                if not mid < sv[k + 1]:
                    mid = sv[k]
                best_thr = float(mid)
        if best_f < 0:
            continue

        go_left = xt[best_f, idx] <= best_thr
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        queue.append((n_nodes, idx[go_left], depth + 1))
        queue.append((n_nodes + 1, idx[~go_left], depth + 1))
        n_nodes += 2
    return feature, threshold, left, right, value, count, n_nodes


def presort(xt: np.ndarray) -> np.ndarray:
    """Stable per-feature argsort of the rows of column-major ``xt``."""
    return np.argsort(xt, axis=1, kind="stable").astype(np.int64)


def grow_tree(xt, y, mult, cw, draws, max_depth, min_leaf, min_split, order=None):
    """Grow one tree on column-major ``xt`` with bootstrap multiplicities ``mult``.

    ``mult[r]`` is how many times row ``r`` was drawn. ``draws[node]`` lists
    (ascending) the candidate features for the node in slot ``node``.
    ``order`` is :func:`presort` of ``xt``, reused across trees when given
    (the numpy path does not need it). Returns ``(feature, threshold, left, right, value, count,
    n_nodes)``; ``value`` is the class-weighted positive frequency.
    """
    xt = np.ascontiguousarray(xt, dtype=np.float64)
    if order is None and USE_NUMBA:
        order = presort(xt)
    args = (
        xt,
        np.ascontiguousarray(y, dtype=np.int64),
        np.ascontiguousarray(mult, dtype=np.int64),
        order,
        np.ascontiguousarray(cw, dtype=np.float64),
        np.ascontiguousarray(draws, dtype=np.int64),
        int(max_depth),
        int(min_leaf),
        int(min_split),
    )
    if USE_NUMBA:
        return _grow_numba(*args)
    return _grow_numpy(*args)


@njit
def _predict_numba(x, feature, threshold, left, right, value):
    n_trees = feature.shape[0]
    n = x.shape[0]
    out = np.zeros(n)
    for t in range(n_trees):
        for i in range(n):
            node = 0
            while feature[t, node] >= 0:
                if x[i, feature[t, node]] <= threshold[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            out[i] += value[t, node]
    return out / n_trees


def _predict_numpy(x, feature, threshold, left, right, value):
    n_trees = feature.shape[0]
    n = x.shape[0]
    rows = np.arange(n)
    out = np.zeros(n)
    for t in range(n_trees):
        node = np.zeros(n, dtype=np.int64)
        f = feature[t, node]
        while (f >= 0).any():
            inner = f >= 0
            go_left = x[rows, np.where(inner, f, 0)] <= threshold[t, node]
            nxt = np.where(go_left, left[t, node], right[t, node])
            node = np.where(inner, nxt, node)
            f = feature[t, node]
        out += value[t, node]
    return out / n_trees


def predict_forest(x, feature, threshold, left, right, value):
    """Mean leaf value over trees for each row of ``x``."""
    args = (
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(feature, dtype=np.int64),
        np.ascontiguousarray(threshold, dtype=np.float64),
        np.ascontiguousarray(left, dtype=np.int64),
        np.ascontiguousarray(right, dtype=np.int64),
        np.ascontiguousarray(value, dtype=np.float64),
    )
    if USE_NUMBA:
        return _predict_numba(*args)
    return _predict_numpy(*args)
