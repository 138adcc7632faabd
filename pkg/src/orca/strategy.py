"""Signal ranks, regime/exposure map, RORO backtest and ensemble WFO."""
from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import asdict, dataclass, fields

import numpy as np
import pandas as pd

from .data import PricePanel
from .errors import DataError, NumericalError
from .kernels import backtest as K
from .kernels.ranks import trailing_rank

log = logging.getLogger(__name__)

RANK_WINDOW = 126
TRANSACTION_COST = 0.0005
LEVERAGE_COST = 0.005
RISK_FREE = 0.04
DEFENSIVE = {"GLD": 0.5, "IEF": 0.3, "UUP": 0.2}
IN_SAMPLE_FRACTION = 0.55
TOP_K = 20


class Regime(enum.IntEnum):
    NORMAL = K.NORMAL
    RALLY = K.RALLY
    CAUTION = K.CAUTION
    EUPHORIA = K.EUPHORIA
    CRISIS = K.CRISIS

    @property
    def label(self) -> str:
        return self.name.capitalize()


@dataclass(frozen=True)
class ExposureParams:
    rally_exit: float = 0.90
    crash_exit: float = 0.60
    rally_entry: float = 0.78
    crash_caution: float = 0.40
    rally_mid: float = 0.60
    sweet_exposure: float = 1.5
    high_exposure: float = 1.2
    base_exposure: float = 1.0
    caution_exposure: float = 0.7
    late_caution_exposure: float = 0.3
    min_hold: int = 8
    max_leverage: float = 1.5
    defensive_scale: float = 1.0

    def __post_init__(self):
        for name in ("rally_exit", "crash_exit", "rally_entry", "crash_caution", "rally_mid"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("sweet_exposure", "high_exposure", "base_exposure", "caution_exposure",
                     "late_caution_exposure", "max_leverage"):
            if not 0.0 <= getattr(self, name) <= 1.5:
                raise ValueError(f"{name} must lie in [0, 1.5]")

    def to_array(self) -> np.ndarray:
        return np.array([float(getattr(self, c)) for c in K.PARAM_COLUMNS])

    @classmethod
    def from_array(cls, row) -> "ExposureParams":
        kw = dict(zip(K.PARAM_COLUMNS, (float(v) for v in row)))
        kw["min_hold"] = int(kw["min_hold"])
        return cls(**kw)


assert tuple(f.name for f in fields(ExposureParams)) == K.PARAM_COLUMNS


@dataclass(frozen=True, eq=False)
class SignalRanks:
    dates: np.ndarray
    rally: np.ndarray
    crash: np.ndarray
    window: int = RANK_WINDOW


def percentile_rank(series, window: int = RANK_WINDOW) -> np.ndarray:
    """(# of the trailing ``window`` values <= current) / window; NaN during warm-up."""
    return trailing_rank(np.asarray(series, dtype=np.float64), window)


def signal_ranks(dates, p_rally, p_crash, window: int = RANK_WINDOW) -> SignalRanks:
    """Ranks for both tasks, dropping the warm-up dates."""
    rr = percentile_rank(p_rally, window)[window - 1:]
    rc = percentile_rank(p_crash, window)[window - 1:]
    return SignalRanks(np.asarray(dates)[window - 1:], rr, rc, window)


def exposure_map(rally_rank: float, crash_rank: float,
                 params: ExposureParams = ExposureParams()) -> tuple[float, Regime]:
    w, cell = K._cell_numpy(rally_rank, crash_rank, params.to_array())
    return float(w), Regime(int(cell))


def regime_series(exposure, cell, sweet: float = 1.5, caution: float = 0.7) -> np.ndarray:
    """Regime of a held exposure path from its exposure band.

    Zero exposure keeps the trigger of the most recent exit cell; otherwise
    ``>= sweet`` is Rally, ``<= caution`` is Caution and the rest Normal.
    """
    w = np.asarray(exposure, dtype=np.float64)
    cell = np.asarray(cell, dtype=np.int64)
    out = np.where(w >= sweet, int(Regime.RALLY),
                   np.where(w <= caution, int(Regime.CAUTION), int(Regime.NORMAL)))
    trigger = int(Regime.CRISIS)
    for t in range(w.shape[0]):
        if cell[t] == Regime.EUPHORIA or cell[t] == Regime.CRISIS:
            trigger = int(cell[t])
        if w[t] == 0.0:
            out[t] = trigger
    return out


def defensive_returns(panel: PricePanel, weights=DEFENSIVE) -> np.ndarray:
    """Daily returns of the fixed-weight defensive sleeve, aligned with ``panel.returns``."""
    missing = [s for s in weights if s not in panel.symbols]
    if missing:
        raise DataError(f"defensive assets missing from panel: {', '.join(missing)}")
    cols = [panel.column(s) for s in weights]
    return panel.returns[:, cols] @ np.array(list(weights.values()))


def forward_returns(panel: PricePanel, dates, equity_symbol: str, weights=DEFENSIVE):
    """Next-day equity and defensive returns for each decision date.

    A position set at the close of ``dates[i]`` earns the return to the
    following panel date. Dates without a following date are rejected.
    """
    pos = np.searchsorted(panel.dates, np.asarray(dates, dtype="datetime64[D]"))
    if (pos >= panel.dates.shape[0]).any() or not np.array_equal(panel.dates[pos], dates):
        raise DataError("signal dates are not panel dates")
    if (pos + 1 >= panel.dates.shape[0]).any():
        raise DataError("signal dates must precede the last panel date")
    eq = panel.returns[pos, panel.column(equity_symbol)]
    return eq, defensive_returns(panel, weights)[pos]


@dataclass(frozen=True, eq=False)
class BacktestLedger:
    dates: np.ndarray
    exposure: np.ndarray
    defensive_weight: np.ndarray
    regime: np.ndarray  # Regime codes
    equity_return: np.ndarray
    defensive_return: np.ndarray
    transaction_cost: np.ndarray
    leverage_cost: np.ndarray
    net_return: np.ndarray
    wealth: np.ndarray

    def __len__(self) -> int:
        return self.dates.shape[0]

    def segment(self, start: int, stop: int | None = None) -> "BacktestLedger":
        """Rows ``start:stop`` with wealth re-based to 1 before ``start``."""
        sl = slice(start, stop)
        net = self.net_return[sl]
        return BacktestLedger(self.dates[sl], self.exposure[sl], self.defensive_weight[sl],
                              self.regime[sl], self.equity_return[sl], self.defensive_return[sl],
                              self.transaction_cost[sl], self.leverage_cost[sl], net,
                              np.cumprod(1.0 + net))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "date": self.dates.astype(str),
            "exposure": self.exposure,
            "defensive_weight": self.defensive_weight,
            "regime": [Regime(int(c)).label for c in self.regime],
            "equity_return": self.equity_return,
            "defensive_return": self.defensive_return,
            "transaction_cost": self.transaction_cost,
            "leverage_cost": self.leverage_cost,
            "net_return": self.net_return,
            "wealth": self.wealth,
        })


def build_ledger(dates, exposure, defensive_weight, equity_return, defensive_return,
                 regime=None) -> BacktestLedger:
    """Cash-flow accounting for a given exposure path.

    The first day carries no transaction cost (the starting position is
    taken as already held).
    """
    w = np.asarray(exposure, dtype=np.float64)
    dw = np.asarray(defensive_weight, dtype=np.float64)
    req = np.asarray(equity_return, dtype=np.float64)
    rdef = np.asarray(defensive_return, dtype=np.float64)
    turnover = np.abs(np.diff(w, prepend=w[:1]))
    tc = TRANSACTION_COST * turnover
    lev = LEVERAGE_COST / 252.0 * np.maximum(0.0, w - 1.0)
    net = w * req + dw * rdef - tc - lev
    if regime is None:
        regime = np.full(w.shape[0], int(Regime.NORMAL))
    return BacktestLedger(np.asarray(dates), w, dw, np.asarray(regime, dtype=np.int64),
                          req, rdef, tc, lev, net, np.cumprod(1.0 + net))


def backtest(ranks: SignalRanks, panel: PricePanel, params: ExposureParams = ExposureParams(),
             equity_symbol: str = "SPY") -> BacktestLedger:
    """Hold-timer exposure path for one parameter set and its ledger."""
    req, rdef = forward_returns(panel, ranks.dates, equity_symbol)
    w, _, cell = K.exposure_paths(ranks.rally, ranks.crash, params.to_array())
    w = w[0]
    dw = params.defensive_scale * np.maximum(0.0, 1.0 - w)
    return build_ledger(ranks.dates, w, dw, req, rdef,
                        regime_series(w, cell[0], params.sweet_exposure, params.caution_exposure))


def benchmark_ledger(ranks: SignalRanks, panel: PricePanel, equity_symbol: str = "SPY"):
    req, rdef = forward_returns(panel, ranks.dates, equity_symbol)
    n = req.shape[0]
    return build_ledger(ranks.dates, np.ones(n), np.zeros(n), req, rdef)


@dataclass(frozen=True)
class PerformanceStats:
    sharpe: float
    cagr: float
    max_drawdown: float
    calmar: float
    n_days: int

    def as_dict(self) -> dict:
        return asdict(self)


def sharpe_ratio(net: np.ndarray, risk_free: float = RISK_FREE) -> float:
    net = np.asarray(net, dtype=np.float64)
    if net.shape[0] < 2 or np.all(net == net[0]):
        if net.shape[0] and net[0] - risk_free / 252.0 == 0.0:
            return 0.0
        raise NumericalError("Sharpe ratio undefined for zero-volatility returns")
    excess = float(np.mean(net - risk_free / 252.0))
    return excess / float(np.std(net, ddof=1)) * np.sqrt(252.0)


def max_drawdown(wealth: np.ndarray) -> float:
    """Worst wealth / running peak - 1, with the starting capital 1 as the first peak."""
    peak = np.maximum.accumulate(np.r_[1.0, wealth])[1:]
    return float(min(0.0, np.min(wealth / peak - 1.0)))


def calmar_ratio(cagr: float, mdd: float) -> float:
    return float("inf") if mdd == 0.0 else cagr / abs(mdd)


def performance_stats(ledger: BacktestLedger, risk_free: float = RISK_FREE) -> PerformanceStats:
    n = len(ledger)
    if n == 0:
        raise DataError("empty ledger")
    cagr = float(ledger.wealth[-1] ** (252.0 / n) - 1.0)
    mdd = max_drawdown(ledger.wealth)
    return PerformanceStats(sharpe_ratio(ledger.net_return, risk_free), cagr, mdd,
                            calmar_ratio(cagr, mdd), n)


GRID_AXES = {
    "rally_entry": (0.70, 0.725, 0.75, 0.775, 0.80, 0.825, 0.85),
    "rally_exit": (0.85, 0.875, 0.90, 0.925, 0.95),
    "crash_exit": (0.50, 0.54, 0.58, 0.62, 0.66, 0.70),
    "crash_caution": (0.30, 0.34, 0.38, 0.42, 0.46, 0.50),
    "base_exposure": (0.8, 1.0, 1.2),
    "max_leverage": (1.2, 1.5),
    "min_hold": (5, 8, 13),
    "defensive_scale": (0.8, 1.0),
}


def parameter_grid(axes: dict | None = None, base: ExposureParams = ExposureParams()) -> np.ndarray:
    """Cartesian lattice over ``axes`` (default ``GRID_AXES``) as a parameter matrix."""
    axes = GRID_AXES if axes is None else axes
    unknown = set(axes) - set(K.PARAM_COLUMNS)
    if unknown:
        raise ValueError(f"unknown grid axes: {sorted(unknown)}")
    names = list(axes)
    combos = np.array(list(itertools.product(*(axes[n] for n in names))), dtype=np.float64)
    out = np.tile(base.to_array(), (combos.shape[0], 1))
    for j, n in enumerate(names):
        out[:, K.PARAM_COLUMNS.index(n)] = combos[:, j]
    return out


@dataclass
class EnsembleResult:
    ledger: BacktestLedger
    benchmark: BacktestLedger
    split: int  # first out-of-sample row
    top_params: np.ndarray
    top_scores: np.ndarray
    member_exposure: np.ndarray  # (k, n)
    report: dict


def ensemble_wfo(ranks: SignalRanks, panel: PricePanel, grid: np.ndarray | None = None,
                 top_k: int = TOP_K, in_sample_fraction: float = IN_SAMPLE_FRACTION,
                 equity_symbol: str = "SPY") -> EnsembleResult:
    """Rank the grid by in-sample Sharpe and average the top sets' positions.

    The in-sample period is the first ``floor(in_sample_fraction * n)`` signal
    dates; the averaged exposure is backtested over the full history and the
    remainder is reported as out-of-sample.
    """
    grid = parameter_grid() if grid is None else np.atleast_2d(np.asarray(grid, dtype=np.float64))
    req, rdef = forward_returns(panel, ranks.dates, equity_symbol)
    n = req.shape[0]
    split = int(np.floor(in_sample_fraction * n))
    if split < 2 or split >= n:
        raise DataError(f"{n} signal dates are too few for an in-sample split")
    scores = K.grid_sharpe(ranks.rally, ranks.crash, req, rdef, grid, split, RISK_FREE / 252.0,
                           TRANSACTION_COST, LEVERAGE_COST / 252.0)
    feasible = np.flatnonzero(np.isfinite(scores))
    if feasible.shape[0] == 0:
        raise NumericalError("no parameter set has a finite in-sample Sharpe ratio")
    if feasible.shape[0] < top_k:
        log.warning("only %d feasible parameter sets; averaging all of them", feasible.shape[0])
    ranked = feasible[np.argsort(-scores[feasible], kind="stable")]
    top = ranked[:top_k]

    w_all, _, _ = K.exposure_paths(ranks.rally, ranks.crash, grid[top])
    dw_all = grid[top, K.DEF_SCALE][:, None] * np.maximum(0.0, 1.0 - w_all)
    w_bar = _member_mean(w_all)
    dw_bar = _member_mean(dw_all)
    _, cell = K._cell_numpy(ranks.rally, ranks.crash, ExposureParams().to_array())
    regime = regime_series(w_bar, cell)
    ledger = build_ledger(ranks.dates, w_bar, dw_bar, req, rdef, regime)
    bench = benchmark_ledger(ranks, panel, equity_symbol)

    in_rows = slice(0, split)
    euph = ranks.rally[in_rows] >= ExposureParams().rally_exit
    cond = float(np.mean(req[in_rows][euph]) * 252.0) if euph.any() else None
    report = {
        "n_signal_dates": n,
        "n_grid": int(grid.shape[0]),
        "n_feasible": int(feasible.shape[0]),
        "top_k": int(top.shape[0]),
        "oos_start": str(ranks.dates[split]),
        "in_sample": performance_stats(ledger.segment(0, split)).as_dict(),
        "out_of_sample": performance_stats(ledger.segment(split)).as_dict(),
        "benchmark_in_sample": performance_stats(bench.segment(0, split)).as_dict(),
        "benchmark_out_of_sample": performance_stats(bench.segment(split)).as_dict(),
        "top_params": [
            {"in_sample_sharpe": float(scores[i]), **asdict(ExposureParams.from_array(grid[i]))}
            for i in top
        ],
        "average_exposure_oos": float(ledger.exposure[split:].mean()),
        "euphoria_conditional_return_in_sample": cond,
        "regimes": [Regime(int(c)).label for c in regime],
    }
    return EnsembleResult(ledger, bench, split, grid[top], scores[top], w_all, report)


def _member_mean(paths: np.ndarray) -> np.ndarray:
    """Column mean that is exact when all members agree, clipped to the member envelope."""
    ref = paths[0]
    avg = ref + np.mean(paths - ref, axis=0)
    return np.clip(avg, paths.min(axis=0), paths.max(axis=0))
