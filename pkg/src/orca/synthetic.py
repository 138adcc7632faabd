"""Synthetic price panels with correlation-spike regimes ahead of index crashes.

Base regime: every asset loads on one common factor with pairwise
correlation ``rho_base``. Before each crash the non-index assets switch to
``rho_spike`` for ``spike_days`` trading days. Their volatility is scaled by
``sqrt((1 - rho_base) / (1 - rho_spike))`` during the spike so the
idiosyncratic part, and with it cross-sectional dispersion, is unchanged.
The index keeps its base loading and volatility throughout, so price-only
indicators on the index carry no information about the spike. Every ``vol_every``-th crash is instead
preceded by ``precursor_days`` of index volatility raised by
``vol_precursor``; scaling one asset's volatility leaves every correlation
unchanged, so only price-based indicators see those episodes. A crash is a
drop of ``crash_size`` spread evenly over ``crash_days`` index returns.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PAPER_UNIVERSE, PricePanel


@dataclass(frozen=True)
class SyntheticSpec:
    n_days: int = 3000
    daily_vol: float = 0.008
    drift: float = 0.0003
    rho_base: float = 0.25
    rho_spike: float = 0.85
    spike_days: int = 30
    vol_every: int = 4
    vol_precursor: float = 1.8
    precursor_days: int = 30
    crash_size: float = 0.10
    crash_days: int = 3
    spacing: tuple[int, int] = (150, 220)
    first_crash: int = 250
    start: str = "2009-01-02"


@dataclass(frozen=True, eq=False)
class SyntheticTruth:
    crash_starts: np.ndarray  # price row of the first crash return
    spike_windows: np.ndarray  # (k, 2) price rows [start, stop)
    vol_windows: np.ndarray  # (k, 2) price rows [start, stop)


def crash_schedule(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    starts = []
    c = spec.first_crash + int(rng.integers(0, spec.spacing[1] - spec.spacing[0]))
    while c + spec.crash_days < spec.n_days:
        starts.append(c)
        c += int(rng.integers(spec.spacing[0], spec.spacing[1] + 1))
    return np.array(starts, dtype=np.int64)


def synthetic_panel(seed: int = 0, spec: SyntheticSpec = SyntheticSpec(),
                    symbols=PAPER_UNIVERSE, index_symbol: str = "SPY"):
    """Return ``(PricePanel, SyntheticTruth)`` for ``spec.n_days`` business days."""
    if spec.first_crash <= max(spec.spike_days, spec.precursor_days):
        raise ValueError("first_crash must exceed the precursor windows")
    rng = np.random.default_rng(seed)
    n_assets = len(symbols)
    idx = list(symbols).index(index_symbol)
    n_ret = spec.n_days - 1
    crashes = crash_schedule(spec, rng)

    # return row k belongs to price row k + 1
    spike = np.zeros(n_ret, dtype=bool)
    loud = np.zeros(n_ret, dtype=bool)
    windows, vol_windows = [], []
    kind = (np.arange(crashes.shape[0]) % spec.vol_every) != spec.vol_every - 1
    for c, is_spike in zip(crashes, kind):
        if is_spike:
            lo = c - spec.spike_days
            spike[lo - 1:c - 1] = True
            windows.append((lo, c))
        else:
            lo = c - spec.precursor_days
            loud[lo - 1:c - 1] = True
            vol_windows.append((lo, c))
    rho = np.where(spike, spec.rho_spike, spec.rho_base)[:, None] * np.ones(n_assets)
    rho[:, idx] = spec.rho_base
    scale = np.where(spike, np.sqrt((1 - spec.rho_base) / (1 - spec.rho_spike)), 1.0)
    vol = spec.daily_vol * scale[:, None] * np.ones(n_assets)
    vol[:, idx] = spec.daily_vol * np.where(loud, spec.vol_precursor, 1.0)

    f = rng.standard_normal((n_ret, 1))
    e = rng.standard_normal((n_ret, n_assets))
    r = spec.drift + vol * (np.sqrt(rho) * f + np.sqrt(1.0 - rho) * e)
    step = (1.0 - spec.crash_size) ** (1.0 / spec.crash_days) - 1.0
    for c in crashes:
        r[c - 1:c - 1 + spec.crash_days, idx] = step

    prices = 100.0 * np.exp(np.vstack([np.zeros((1, n_assets)), np.cumsum(np.log1p(r), axis=0)]))
    dates = np.busday_offset(np.datetime64(spec.start, "D"), np.arange(spec.n_days), roll="forward")
    panel = PricePanel.from_prices(dates, symbols, prices)
    return panel, SyntheticTruth(crashes, np.array(windows, dtype=np.int64).reshape(-1, 2),
                                 np.array(vol_windows, dtype=np.int64).reshape(-1, 2))
