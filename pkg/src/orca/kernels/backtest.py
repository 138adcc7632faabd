"""Exposure-map evaluation, hold-timer paths and grid Sharpe scoring.

Parameter sets are rows of a float matrix with columns given by ``PARAM_COLUMNS``.
"""
from __future__ import annotations

import numpy as np

from .._accel import USE_NUMBA, njit

PARAM_COLUMNS = (
    "rally_exit",
    "crash_exit",
    "rally_entry",
    "crash_caution",
    "rally_mid",
    "sweet_exposure",
    "high_exposure",
    "base_exposure",
    "caution_exposure",
    "late_caution_exposure",
    "min_hold",
    "max_leverage",
    "defensive_scale",
)
(RALLY_EXIT, CRASH_EXIT, RALLY_ENTRY, CRASH_CAUTION, RALLY_MID, SWEET, HIGH, BASE,
 CAUTION_EXP, LATE_CAUTION_EXP, MIN_HOLD, MAX_LEV, DEF_SCALE) = range(len(PARAM_COLUMNS))

# cell codes
NORMAL, RALLY, CAUTION, EUPHORIA, CRISIS = range(5)


@njit
def _cell_numba(rr, rc, p):
    if rr >= p[RALLY_EXIT]:
        return 0.0, EUPHORIA
    if rc >= p[CRASH_EXIT]:
        return 0.0, CRISIS
    if rc < p[CRASH_CAUTION]:
        if rr >= p[RALLY_ENTRY]:
            w, cell = p[SWEET], RALLY
        elif rr >= p[RALLY_MID]:
            w, cell = p[HIGH], NORMAL
        else:
            w, cell = p[BASE], NORMAL
    elif rr < p[RALLY_ENTRY]:
        w, cell = p[CAUTION_EXP], CAUTION
    else:
        w, cell = p[LATE_CAUTION_EXP], CAUTION
    return min(w, p[MAX_LEV]), cell


def _cell_numpy(rr, rc, p):
    """Vectorised over any broadcastable ``rr``, ``rc`` and ``p`` (last axis)."""
    p = np.asarray(p, dtype=np.float64)
    rr = np.asarray(rr, dtype=np.float64)
    rc = np.asarray(rc, dtype=np.float64)
    col = lambda i: p[..., i]  # noqa: E731
    euph = rr >= col(RALLY_EXIT)
    crisis = ~euph & (rc >= col(CRASH_EXIT))
    calm = rc < col(CRASH_CAUTION)
    sweet = rr >= col(RALLY_ENTRY)
    w = np.where(
        calm,
        np.where(sweet, col(SWEET), np.where(rr >= col(RALLY_MID), col(HIGH), col(BASE))),
        np.where(sweet, col(LATE_CAUTION_EXP), col(CAUTION_EXP)),
    )
    cell = np.where(calm, np.where(sweet, RALLY, NORMAL), CAUTION)
    w = np.minimum(w, col(MAX_LEV))
    w = np.where(euph | crisis, 0.0, w)
    cell = np.where(euph, EUPHORIA, np.where(crisis, CRISIS, cell))
    return w, cell.astype(np.int64)


@njit
def _paths_numba(rr, rc, params):
    k_sets = params.shape[0]
    n = rr.shape[0]
    w_out = np.zeros((k_sets, n))
    target_out = np.zeros((k_sets, n))
    cell_out = np.zeros((k_sets, n), dtype=np.int64)
    for k in range(k_sets):
        p = params[k]
        hold = p[MIN_HOLD]
        w = 0.0
        since = 0.0
        for t in range(n):
            target, cell = _cell_numba(rr[t], rc[t], p)
            if t == 0:
                w = target
                since = 0.0
            else:
                since += 1.0
                if target != w and (target == 0.0 or since >= hold):
                    w = target
                    since = 0.0
            w_out[k, t] = w
            target_out[k, t] = target
            cell_out[k, t] = cell
    return w_out, target_out, cell_out


def _paths_numpy(rr, rc, params):
    k_sets = params.shape[0]
    n = rr.shape[0]
    target, cell = _cell_numpy(rr[None, :], rc[None, :], params[:, None, :])
    target = np.broadcast_to(target, (k_sets, n)).copy()
    cell = np.broadcast_to(cell, (k_sets, n)).copy()
    hold = params[:, MIN_HOLD]
    w_out = np.zeros((k_sets, n))
    if n == 0:
        return w_out, target, cell
    w = target[:, 0].copy()
    since = np.zeros(k_sets)
    w_out[:, 0] = w
    for t in range(1, n):
        since += 1.0
        tg = target[:, t]
        switch = (tg != w) & ((tg == 0.0) | (since >= hold))
        w = np.where(switch, tg, w)
        since = np.where(switch, 0.0, since)
        w_out[:, t] = w
    return w_out, target, cell


def exposure_paths(rr, rc, params):
    """Held exposure, raw target exposure and cell code per set and date.

    The first date takes its target directly; afterwards a new target is
    adopted only once ``min_hold`` days have passed since the last change,
    except that a zero target is adopted immediately.
    """
    rr = np.ascontiguousarray(rr, dtype=np.float64)
    rc = np.ascontiguousarray(rc, dtype=np.float64)
    params = np.ascontiguousarray(np.atleast_2d(params), dtype=np.float64)
    if USE_NUMBA:
        return _paths_numba(rr, rc, params)
    return _paths_numpy(rr, rc, params)


@njit
def _grid_sharpe_numba(rr, rc, r_eq, r_def, params, n_in, rf_daily, tc, lev_daily):
    k_sets = params.shape[0]
    out = np.empty(k_sets)
    for k in range(k_sets):
        p = params[k]
        hold = p[MIN_HOLD]
        dscale = p[DEF_SCALE]
        w = 0.0
        w_prev = 0.0
        since = 0.0
        mean = 0.0
        m2 = 0.0
        for t in range(n_in):
            target, cell = _cell_numba(rr[t], rc[t], p)
            if t == 0:
                w = target
                w_prev = target
                since = 0.0
            else:
                since += 1.0
                if target != w and (target == 0.0 or since >= hold):
                    w = target
                    since = 0.0
            dw = dscale * max(0.0, 1.0 - w)
            net = (w * r_eq[t] + dw * r_def[t] - tc * abs(w - w_prev)
                   - lev_daily * max(0.0, w - 1.0))
            w_prev = w
            delta = net - mean
            mean += delta / (t + 1)
            m2 += delta * (net - mean)
        if n_in > 1 and m2 > 0.0:
            out[k] = (mean - rf_daily) / np.sqrt(m2 / (n_in - 1)) * np.sqrt(252.0)
        else:
            out[k] = -np.inf
    return out


def _grid_sharpe_numpy(rr, rc, r_eq, r_def, params, n_in, rf_daily, tc, lev_daily):
    k_sets = params.shape[0]
    target, _ = _cell_numpy(rr[None, :n_in], rc[None, :n_in], params[:, None, :])
    target = np.broadcast_to(target, (k_sets, n_in))
    hold = params[:, MIN_HOLD]
    dscale = params[:, DEF_SCALE]
    mean = np.zeros(k_sets)
    m2 = np.zeros(k_sets)
    w = np.zeros(k_sets)
    w_prev = np.zeros(k_sets)
    since = np.zeros(k_sets)
    for t in range(n_in):
        tg = target[:, t]
        if t == 0:
            w = tg.copy()
            w_prev = tg.copy()
        else:
            since += 1.0
            switch = (tg != w) & ((tg == 0.0) | (since >= hold))
            w = np.where(switch, tg, w)
            since = np.where(switch, 0.0, since)
        dw = dscale * np.maximum(0.0, 1.0 - w)
        net = (w * r_eq[t] + dw * r_def[t] - tc * np.abs(w - w_prev)
               - lev_daily * np.maximum(0.0, w - 1.0))
        w_prev = w
        delta = net - mean
        mean = mean + delta / (t + 1)
        m2 = m2 + delta * (net - mean)
    out = np.full(k_sets, -np.inf)
    if n_in > 1:
        ok = m2 > 0.0
        out[ok] = (mean[ok] - rf_daily) / np.sqrt(m2[ok] / (n_in - 1)) * np.sqrt(252.0)
    return out


def grid_sharpe(rr, rc, r_eq, r_def, params, n_in, rf_daily, tc, lev_daily):
    """Annualised Sharpe of every parameter set over the first ``n_in`` dates.

    Sets whose net return has zero variance score ``-inf``.
    """
    args = (
        np.ascontiguousarray(rr, dtype=np.float64),
        np.ascontiguousarray(rc, dtype=np.float64),
        np.ascontiguousarray(r_eq, dtype=np.float64),
        np.ascontiguousarray(r_def, dtype=np.float64),
        np.ascontiguousarray(np.atleast_2d(params), dtype=np.float64),
        int(n_in),
        float(rf_daily),
        float(tc),
        float(lev_daily),
    )
    if USE_NUMBA:
        return _grid_sharpe_numba(*args)
    return _grid_sharpe_numpy(*args)
