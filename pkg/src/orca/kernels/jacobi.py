"""Cyclic Jacobi eigensolver for small dense symmetric matrices.

Rotations are applied in round-robin (tournament) order: every sweep visits
each off-diagonal pair exactly once, grouped into ``n - 1`` rounds of
disjoint pairs. The numba path applies the pairs of a round one by one, the
numpy path applies a whole round as one orthogonal similarity transform.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .._accel import USE_NUMBA, njit

TOL = 1e-12
MAX_SWEEPS = 100


@lru_cache(maxsize=None)
def round_robin_schedule(n: int) -> np.ndarray:
    """Pairs ``(p, q)`` with ``p < q`` grouped as ``(rounds, n_pairs, 2)``.

    For odd ``n`` a phantom index is added and pairs touching it dropped, so
    rows may contain ``-1`` padding.
    """
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for k in range(m // 2):
            a, b = players[k], players[m - 1 - k]
            if a < n and b < n:
                pairs.append((min(a, b), max(a, b)))
        while len(pairs) < m // 2:
            pairs.append((-1, -1))
        rounds.append(pairs)
        players = [players[0]] + [players[-1]] + players[1:-1]
    out = np.asarray(rounds, dtype=np.int64)
    out.setflags(write=False)
    return out


def _offdiag_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(off * off)))


@njit
def _jacobi_numba(a, schedule, tol, max_sweeps):
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n)
    sweeps = 0
    converged = False
    while sweeps <= max_sweeps:
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += a[i, j] * a[i, j]
        if np.sqrt(off) < tol:
            converged = True
            break
        if sweeps == max_sweeps:
            break
        for r in range(schedule.shape[0]):
            for k in range(schedule.shape[1]):
                p = schedule[r, k, 0]
                q = schedule[r, k, 1]
                if p < 0:
                    continue
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                sgn = 1.0 if theta >= 0.0 else -1.0
                t = sgn / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for i in range(n):
                    aip = a[i, p]
                    aiq = a[i, q]
                    a[i, p] = c * aip - s * aiq
                    a[i, q] = s * aip + c * aiq
                for i in range(n):
                    api = a[p, i]
                    aqi = a[q, i]
                    a[p, i] = c * api - s * aqi
                    a[q, i] = s * api + c * aqi
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(n):
                    vip = v[i, p]
                    viq = v[i, q]
                    v[i, p] = c * vip - s * viq
                    v[i, q] = s * vip + c * viq
        sweeps += 1
    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i]
    return w, v, converged, sweeps


def _jacobi_numpy(a, schedule, tol, max_sweeps):
    n = a.shape[0]
    a = np.array(a, dtype=np.float64, copy=True)
    v = np.eye(n)
    sweeps = 0
    converged = False
    while sweeps <= max_sweeps:
        if _offdiag_norm(a) < tol:
            converged = True
            break
        if sweeps == max_sweeps:
            break
        for pairs in schedule:
            pairs = pairs[pairs[:, 0] >= 0]
            p, q = pairs[:, 0], pairs[:, 1]
            apq = a[p, q]
            live = np.abs(apq) >= 1e-300
            if not live.any():
                continue
            p, q, apq = p[live], q[live], apq[live]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            sgn = np.where(theta >= 0.0, 1.0, -1.0)
            t = sgn / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            rot = np.eye(n)
            rot[p, p] = c
            rot[q, q] = c
            rot[p, q] = s
            rot[q, p] = -s
            a = rot.T @ a @ rot
            a[p, q] = 0.0
            a[q, p] = 0.0
            v = v @ rot
        sweeps += 1
    return np.diag(a).copy(), v, converged, sweeps


def jacobi_eigh(a: np.ndarray, tol: float = TOL, max_sweeps: int = MAX_SWEEPS):
    """Eigen-decompose symmetric ``a``.

    Returns ``(eigenvalues, eigenvectors, converged, sweeps)`` with the
    eigenvalues in the solver's natural (unsorted) order and eigenvectors as
    columns.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    schedule = round_robin_schedule(a.shape[0])
    if USE_NUMBA:
        return _jacobi_numba(a, schedule, tol, max_sweeps)
    return _jacobi_numpy(a, schedule, tol, max_sweeps)
