"""Price panel loading, cleaning and windowing."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError, InsufficientHistoryError, WindowUnavailableError

log = logging.getLogger(__name__)

PAPER_UNIVERSE = (
    "SPY", "QQQ", "IWM",
    "XLF", "XLE", "XLK", "XLV", "XLU", "XLP", "XLY", "XLI", "XLB", "XLRE",
    "EFA", "EEM", "VGK", "EWJ",
    "TLT", "IEF", "LQD", "HYG",
    "GLD", "USO",
    "UUP",
)
MAX_FFILL_DAYS = 5
MIN_ROWS = 756


@dataclass(frozen=True, eq=False)
class PricePanel:
    """Aligned daily closes; ``returns[k]`` belongs to ``dates[k + 1]``."""

    dates: np.ndarray  # datetime64[D], strictly increasing
    symbols: tuple[str, ...]
    prices: np.ndarray  # (T, n)
    returns: np.ndarray  # (T - 1, n) simple returns

    def __post_init__(self):
        for arr in (self.dates, self.prices, self.returns):
            arr.setflags(write=False)

    @classmethod
    def from_prices(cls, dates, symbols: Sequence[str], prices) -> "PricePanel":
        dates = np.asarray(dates, dtype="datetime64[D]")
        prices = np.array(prices, dtype=np.float64)
        symbols = tuple(str(s) for s in symbols)
        if len(set(symbols)) != len(symbols):
            raise DataError("duplicate symbols in panel")
        if prices.shape != (dates.shape[0], len(symbols)):
            raise DataError(f"price matrix shape {prices.shape} does not match dates/symbols")
        if dates.shape[0] > 1 and not np.all(dates[1:] > dates[:-1]):
            raise DataError("panel dates must be strictly increasing")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise DataError("prices must be finite and positive after cleaning")
        returns = prices[1:] / prices[:-1] - 1.0
        return cls(dates, symbols, prices, returns)

    @property
    def n_assets(self) -> int:
        return len(self.symbols)

    @property
    def return_dates(self) -> np.ndarray:
        return self.dates[1:]

    def column(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise ConfigError(f"symbol {symbol!r} not in panel") from None

    def position(self, date) -> int:
        """Index of ``date`` in :attr:`dates`."""
        d = np.datetime64(date, "D")
        k = int(np.searchsorted(self.dates, d))
        if k >= len(self.dates) or self.dates[k] != d:
            raise WindowUnavailableError(f"{d} is not a panel date")
        return k

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.prices, index=pd.DatetimeIndex(self.dates, name="date"),
                            columns=list(self.symbols))


def clean_prices(frame: pd.DataFrame, max_ffill: int = MAX_FFILL_DAYS) -> pd.DataFrame:
    """Forward-fill runs of up to ``max_ffill`` missing days, then drop incomplete dates."""
    filled = frame.ffill(limit=max_ffill)
    keep = filled.notna().all(axis=1)
    n_drop = int((~keep).sum())
    if n_drop:
        log.info("dropping %d dates with residual missing prices", n_drop)
    return filled.loc[keep]


def load_panel(source: str | Path, universe: Sequence[str] = PAPER_UNIVERSE,
               min_rows: int = MIN_ROWS) -> PricePanel:
    """Read a wide ``date,SYM1,...`` CSV of adjusted closes into a cleaned panel."""
    source = Path(source)
    try:
        raw = pd.read_csv(source, comment="#")
    except FileNotFoundError:
        raise ConfigError(f"price file not found: {source}") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"{source}: cannot parse price table ({exc})") from None
    if "date" not in raw.columns:
        raise DataError(f"{source}: first column must be 'date'")
    missing = [s for s in universe if s not in raw.columns]
    if missing:
        raise ConfigError(f"{source}: symbols missing from price table: {', '.join(missing)}")
    try:
        idx = pd.to_datetime(raw["date"], format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise DataError(f"{source}: bad date column ({exc})") from None
    frame = raw[list(universe)].apply(pd.to_numeric, errors="coerce")
    frame.index = idx
    if frame.index.has_duplicates:
        raise DataError(f"{source}: duplicate dates")
    frame = frame.sort_index()
    frame = frame.where(frame > 0)
    cleaned = clean_prices(frame)
    if len(cleaned) < min_rows:
        raise InsufficientHistoryError(
            f"{source}: {len(cleaned)} usable rows after cleaning, need {min_rows}")
    return PricePanel.from_prices(cleaned.index.values.astype("datetime64[D]"),
                                  universe, cleaned.to_numpy())


def window_at(panel: PricePanel, pos: int, length: int) -> np.ndarray:
    """Trailing ``length`` return rows ending at price-date index ``pos``."""
    if pos < length or pos >= len(panel.dates):
        raise WindowUnavailableError(
            f"need {length} returns ending {panel.dates[min(pos, len(panel.dates) - 1)]}")
    return panel.returns[pos - length:pos]


def window(panel: PricePanel, end_date, length: int) -> np.ndarray:
    """Trailing ``length`` rows of returns ending at ``end_date`` inclusive."""
    return window_at(panel, panel.position(end_date), length)
