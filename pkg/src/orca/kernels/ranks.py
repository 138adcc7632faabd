"""Trailing percentile rank: (# window values <= current) / window."""
from __future__ import annotations

import numpy as np

from .._accel import USE_NUMBA, njit


@njit
def _trailing_rank_numba(x, window):
    n = x.shape[0]
    out = np.full(n, np.nan)
    for t in range(window - 1, n):
        cur = x[t]
        cnt = 0
        for k in range(t - window + 1, t + 1):
            if x[k] <= cur:
                cnt += 1
        out[t] = cnt / window
    return out


def _trailing_rank_numpy(x, window):
    n = x.shape[0]
    out = np.full(n, np.nan)
    if n < window:
        return out
    win = np.lib.stride_tricks.sliding_window_view(x, window)
    cur = x[window - 1:]
    out[window - 1:] = (win <= cur[:, None]).sum(axis=1) / window
    return out


def trailing_rank(x: np.ndarray, window: int) -> np.ndarray:
    """Rank of each value within its trailing ``window`` values (itself included).

    The first ``window - 1`` positions are NaN.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if USE_NUMBA:
        return _trailing_rank_numba(x, int(window))
    return _trailing_rank_numpy(x, int(window))
