import logging

import numpy as np
import pytest

from orca.data import PricePanel
from orca.errors import InsufficientHistoryError, LeakageError
from orca.labels import FoldSpec, assert_no_leakage, make_folds, make_targets

from conftest import make_panel
from oracles import labels_oracle


def _panel(prices):
    n = len(prices)
    dates = np.busday_offset(np.datetime64("2020-01-02", "D"), np.arange(n), roll="forward")
    return PricePanel.from_prices(dates, ["IDX", "B"],
                                  np.column_stack([prices, np.linspace(1, 2, n)]))


def test_flat_prices_have_no_events(caplog):
    t = make_targets(_panel(np.full(50, 100.0)), "IDX")
    assert t.rally.sum() == 0 and t.crash.sum() == 0
    assert t.labeled.sum() == 40 and not t.labeled[-10:].any()
    assert "base rate" in caplog.text


def test_dip_then_recovery():
    p = np.full(30, 100.0)
    p[4] = 92.0  # -8% on day 4
    p[10] = 101.0  # +1% at the horizon
    p[11:] = 101.0
    t = make_targets(_panel(p), "IDX")
    assert t.crash[0] == 1 and t.rally[0] == 0
    assert t.crash[4] == 0


def test_thresholds_are_strict():
    p = np.full(30, 100.0)
    p[10:] = 102.99
    t = make_targets(_panel(p), "IDX")
    assert t.rally[0] == 0
    p[10:] = 103.01
    assert make_targets(_panel(p), "IDX").rally[0] == 1


def test_random_walk_matches_oracle():
    panel = make_panel(n_days=500, n_assets=2, seed=3, symbols=["IDX", "B"], vol=0.02)
    t = make_targets(panel, "IDX")
    rally, crash = labels_oracle(list(panel.prices[:, 0]))
    assert t.rally.tolist() == rally and t.crash.tolist() == crash
    assert t.crash.sum() > 0 and t.rally.sum() > 0


def test_fold_layout_by_hand():
    # 15 business years of prices leave 3650 feature rows
    folds = make_folds(3650)
    assert len(folds) == 8
    f0, f7 = folds[0], folds[-1]
    assert (f0.test_start, f0.test_end) == (2642, 2767)
    assert (f0.train_start, f0.train_end) == (1876, 2631)
    assert (f7.test_start, f7.test_end) == (3524, 3649)
    for a, b in zip(folds, folds[1:]):
        assert b.test_start == a.test_end + 1
    for f in folds:
        assert f.train.shape[0] == 756 and f.test.shape[0] == 126
        assert f.test_start - f.train_end - 1 == 10
    assert_no_leakage(folds)


def test_expanding_starts_at_zero():
    folds = make_folds(3650, expanding=True)
    assert all(f.train_start == 0 for f in folds)
    assert folds[1].train.shape[0] == folds[0].train.shape[0] + 126


def test_short_history_drops_oldest(caplog):
    n = 756 + 10 + 126 * 8 - 126  # one fold short
    with caplog.at_level(logging.WARNING):
        folds = make_folds(n)
    assert len(folds) == 7 and folds[-1].test_end == n - 1
    assert "7 of 8" in caplog.text
    with pytest.raises(InsufficientHistoryError):
        make_folds(n, strict=True)
    with pytest.raises(InsufficientHistoryError):
        make_folds(500)


def test_gap_shorter_than_horizon_is_rejected():
    folds = make_folds(3000, gap_days=0)
    with pytest.raises(LeakageError):
        assert_no_leakage(folds, horizon=10)
    assert_no_leakage(make_folds(3000, gap_days=10), horizon=10)
    with pytest.raises(LeakageError):
        assert_no_leakage(make_folds(3000, gap_days=9), horizon=10)


def test_non_consecutive_tests_rejected():
    a = FoldSpec(0, 0, 99, 110, 129)
    b = FoldSpec(1, 20, 119, 140, 159)
    with pytest.raises(LeakageError):
        assert_no_leakage([a, b])
