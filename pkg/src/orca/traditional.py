"""Price-derived indicators for the index series plus cross-asset dispersion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data import PricePanel
from .errors import InsufficientHistoryError
from .spectral import FeatureRow

ANN = np.sqrt(252.0)


@dataclass(frozen=True)
class IndicatorConfig:
    return_horizons: tuple[int, ...] = (1, 5, 10, 20, 60)
    vol_windows: tuple[int, ...] = (5, 10, 20, 60)
    vol_ratios: tuple[tuple[int, int], ...] = ((5, 20), (10, 60))
    garch_alpha: float = 0.1
    garch_beta: float = 0.85
    semi_dev_window: int = 20
    max_loss_windows: tuple[int, ...] = (5, 20)
    sma_lengths: tuple[int, ...] = (10, 20, 50)
    rsi_period: int = 14
    drawdown_windows: tuple[int, ...] = (20, 60)
    moment_windows: tuple[int, ...] = (20, 60)
    vov_inner: int = 5
    vov_outer: int = 20

    def __post_init__(self):
        ints = (*self.return_horizons, *self.vol_windows, *sum(self.vol_ratios, ()),
                self.semi_dev_window, *self.max_loss_windows, *self.sma_lengths,
                self.rsi_period, *self.drawdown_windows, *self.moment_windows,
                self.vov_inner, self.vov_outer)
        if any(int(w) != w or w <= 0 for w in ints):
            raise ValueError("indicator windows must be positive integers")

    @property
    def min_history(self) -> int:
        """Price rows needed before the first complete row."""
        return 1 + max(*self.return_horizons, *self.vol_windows, *self.sma_lengths,
                       *self.drawdown_windows, *self.moment_windows, self.rsi_period,
                       self.vov_inner + self.vov_outer - 1)


def feature_names(cfg: IndicatorConfig = IndicatorConfig()) -> list[str]:
    names = [f"return_{h}d" for h in cfg.return_horizons]
    names += [f"volatility_{w}d" for w in cfg.vol_windows]
    names += [f"vol_ratio_{a}_{b}" for a, b in cfg.vol_ratios]
    names += ["garch_vol", f"semi_dev_{cfg.semi_dev_window}d"]
    names += [f"max_loss_{w}d" for w in cfg.max_loss_windows]
    names += [f"price_to_sma_{n}" for n in cfg.sma_lengths]
    names += [f"rsi_{cfg.rsi_period}"]
    names += [f"drawdown_{w}d" for w in cfg.drawdown_windows]
    names += [f"skew_{w}d" for w in cfg.moment_windows]
    names += [f"kurt_{w}d" for w in cfg.moment_windows]
    names += ["vol_of_vol", "cross_asset_dispersion"]
    return names


def garch_variance(r: np.ndarray, alpha: float = 0.1, beta: float = 0.85) -> np.ndarray:
    """One-step-ahead GARCH(1,1) variance after each return.

    ``omega`` tracks the expanding sample variance so that the unconditional
    level ``omega / (1 - alpha - beta)`` equals it; the recursion is seeded at
    the first sample variance.
    """
    r = np.asarray(r, dtype=np.float64)
    k = np.arange(1, r.shape[0] + 1)
    mean = np.cumsum(r) / k
    svar = np.maximum(np.cumsum(r * r) / k - mean * mean, 0.0)
    svar[0] = r[0] * r[0]
    h = np.empty_like(r)
    prev = svar[0]
    persistence = 1.0 - alpha - beta
    for t in range(r.shape[0]):
        prev = svar[t] * persistence + alpha * r[t] * r[t] + beta * prev
        h[t] = prev
    return h


def wilder_rsi(prices: np.ndarray, period: int = 14) -> np.ndarray:
    """Wilder RSI per price row (NaN until ``period`` changes exist; 50 when flat)."""
    change = np.diff(prices)
    gain = np.maximum(change, 0.0)
    loss = np.maximum(-change, 0.0)
    out = np.full(prices.shape[0], np.nan)
    if change.shape[0] < period:
        return out
    ag = gain[:period].mean()
    al = loss[:period].mean()
    for t in range(period, prices.shape[0]):
        if t > period:
            ag = (ag * (period - 1) + gain[t - 1]) / period
            al = (al * (period - 1) + loss[t - 1]) / period
        if al == 0.0:
            out[t] = 50.0 if ag == 0.0 else 100.0
        else:
            out[t] = 100.0 - 100.0 / (1.0 + ag / al)
    return out


def _rolling(x: np.ndarray, w: int, fn) -> np.ndarray:
    """``fn`` over trailing windows of ``x`` (axis=1 of the window view), NaN-padded."""
    out = np.full(x.shape[0], np.nan)
    if x.shape[0] >= w:
        out[w - 1:] = fn(sliding_window_view(x, w))
    return out


def _std1(v):
    return v.std(axis=1, ddof=1) if v.shape[1] > 1 else np.zeros(v.shape[0])


def _semi(v):
    neg = v < 0
    cnt = neg.sum(axis=1)
    safe = np.maximum(cnt, 1)
    mu = np.where(neg, v, 0.0).sum(axis=1) / safe
    d = np.where(neg, v - mu[:, None], 0.0)
    return np.sqrt((d * d).sum(axis=1) / safe)


def _skew_kurt(v):
    d = v - v.mean(axis=1, keepdims=True)
    m2 = np.mean(d * d, axis=1)
    ok = np.sqrt(m2) >= 1e-12
    safe = np.where(ok, m2, 1.0)
    skew = np.where(ok, np.mean(d ** 3, axis=1) / safe ** 1.5, 0.0)
    kurt = np.where(ok, np.mean(d ** 4, axis=1) / safe ** 2 - 3.0, 0.0)
    return skew, kurt


def traditional_matrix(panel: PricePanel, index_symbol: str,
                       cfg: IndicatorConfig = IndicatorConfig()) -> tuple[list[str], np.ndarray]:
    """All indicator columns for every price date; rows before ``cfg.min_history - 1`` are NaN."""
    p = panel.prices[:, panel.column(index_symbol)]
    n = p.shape[0]
    r = np.concatenate([[np.nan], p[1:] / p[:-1] - 1.0])
    cols: dict[str, np.ndarray] = {}

    for h in cfg.return_horizons:
        v = np.full(n, np.nan)
        v[h:] = p[h:] / p[:-h] - 1.0
        cols[f"return_{h}d"] = v
    vols = {}
    for w in set(cfg.vol_windows) | {cfg.vov_inner} | set(sum(cfg.vol_ratios, ())):
        vols[w] = _rolling(r, w, _std1) * ANN
    for w in cfg.vol_windows:
        cols[f"volatility_{w}d"] = vols[w]
    for a, b in cfg.vol_ratios:
        with np.errstate(invalid="ignore", divide="ignore"):
            cols[f"vol_ratio_{a}_{b}"] = np.where(vols[b] > 0, vols[a] / vols[b], 1.0)
        cols[f"vol_ratio_{a}_{b}"][np.isnan(vols[b]) | np.isnan(vols[a])] = np.nan

    g = np.full(n, np.nan)
    if n > 1:
        g[1:] = np.sqrt(garch_variance(r[1:], cfg.garch_alpha, cfg.garch_beta)) * ANN
    cols["garch_vol"] = g
    cols[f"semi_dev_{cfg.semi_dev_window}d"] = _rolling(r, cfg.semi_dev_window, _semi) * ANN
    for w in cfg.max_loss_windows:
        cols[f"max_loss_{w}d"] = np.maximum(0.0, -_rolling(r, w, lambda v: v.min(axis=1))) + 0.0
    for m in cfg.sma_lengths:
        cols[f"price_to_sma_{m}"] = p / _rolling(p, m, lambda v: v.mean(axis=1))
    cols[f"rsi_{cfg.rsi_period}"] = wilder_rsi(p, cfg.rsi_period)
    for w in cfg.drawdown_windows:
        cols[f"drawdown_{w}d"] = p / _rolling(p, w, lambda v: v.max(axis=1)) - 1.0
    sk = {}
    for w in cfg.moment_windows:
        s, k = np.full(n, np.nan), np.full(n, np.nan)
        if n > w:
            s[w:], k[w:] = _skew_kurt(sliding_window_view(r[1:], w))
        sk[w] = (s, k)
    for w in cfg.moment_windows:
        cols[f"skew_{w}d"] = sk[w][0]
    for w in cfg.moment_windows:
        cols[f"kurt_{w}d"] = sk[w][1]
    cols["vol_of_vol"] = _rolling(vols[cfg.vov_inner], cfg.vov_outer, _std1)
    disp = np.full(n, np.nan)
    disp[1:] = panel.returns.std(axis=1)
    cols["cross_asset_dispersion"] = disp

    names = feature_names(cfg)
    values = np.column_stack([cols[k] for k in names])
    values[: cfg.min_history - 1] = np.nan
    return names, values


def traditional_row(panel: PricePanel, index_symbol: str, as_of,
                    cfg: IndicatorConfig = IndicatorConfig()) -> FeatureRow:
    """Indicators at ``as_of`` computed from prices up to that date only."""
    pos = panel.position(as_of)
    if pos + 1 < cfg.min_history:
        raise InsufficientHistoryError(
            f"{pos + 1} price rows at {panel.dates[pos]}, need {cfg.min_history}")
    head = PricePanel.from_prices(panel.dates[:pos + 1], panel.symbols, panel.prices[:pos + 1])
    names, values = traditional_matrix(head, index_symbol, cfg)
    return FeatureRow(panel.dates[pos], tuple(names), values[-1].copy(), "")
