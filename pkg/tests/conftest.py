from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from orca.data import PricePanel


def make_panel(n_days=400, n_assets=5, seed=0, symbols=None, vol=0.01):
    rng = np.random.default_rng(seed)
    symbols = symbols or [f"A{i}" for i in range(n_assets)]
    r = rng.normal(0.0003, vol, (n_days - 1, len(symbols)))
    prices = 100 * np.vstack([np.ones(len(symbols)), np.cumprod(1 + r, axis=0)])
    dates = np.busday_offset(np.datetime64("2015-01-02", "D"), np.arange(n_days), roll="forward")
    return PricePanel.from_prices(dates, symbols, prices)


def write_price_csv(path, panel: PricePanel):
    frame = panel.to_frame()
    frame.index = frame.index.strftime("%Y-%m-%d")
    frame.index.name = "date"
    frame.to_csv(path)
    return path


@pytest.fixture
def panel():
    return make_panel()


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
