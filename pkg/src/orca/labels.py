"""Rally/crash targets and the walk-forward fold layout."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import PricePanel
from .errors import InsufficientHistoryError, LeakageError

log = logging.getLogger(__name__)

HORIZON = 10
RALLY_THRESHOLD = 0.03
CRASH_THRESHOLD = 0.07
TRAIN_DAYS = 756
GAP_DAYS = 10
TEST_DAYS = 126
N_FOLDS = 8
RALLY_BASE_RATE = (0.01, 0.25)
CRASH_BASE_RATE = (0.001, 0.05)


@dataclass(frozen=True, eq=False)
class TargetSet:
    dates: np.ndarray
    rally: np.ndarray  # int8, 0 where unlabeled
    crash: np.ndarray
    labeled: np.ndarray  # bool; False for the final ``horizon`` dates
    horizon: int = HORIZON

    def task(self, name: str) -> np.ndarray:
        return {"rally": self.rally, "crash": self.crash}[name]

    def base_rate_warnings(self) -> list[str]:
        msgs = []
        for name, (lo, hi) in (("rally", RALLY_BASE_RATE), ("crash", CRASH_BASE_RATE)):
            rate = float(self.task(name)[self.labeled].mean()) if self.labeled.any() else 0.0
            if not lo <= rate <= hi:
                msgs.append(f"{name} base rate {rate:.2%} outside [{lo:.1%}, {hi:.1%}]")
        return msgs


def make_targets(panel: PricePanel, index_symbol: str, horizon: int = HORIZON,
                 rally_threshold: float = RALLY_THRESHOLD,
                 crash_threshold: float = CRASH_THRESHOLD) -> TargetSet:
    """Rally: endpoint return over ``horizon`` days above the threshold.
    Crash: worst close within the next ``horizon`` days more than the
    threshold below today's close.
    """
    p = panel.prices[:, panel.column(index_symbol)]
    n = p.shape[0]
    rally = np.zeros(n, dtype=np.int8)
    crash = np.zeros(n, dtype=np.int8)
    labeled = np.zeros(n, dtype=bool)
    m = n - horizon
    if m > 0:
        fwd = np.lib.stride_tricks.sliding_window_view(p[1:], horizon)[:m]
        rally[:m] = p[horizon:] / p[:m] - 1.0 > rally_threshold
        crash[:m] = fwd.min(axis=1) / p[:m] - 1.0 < -crash_threshold
        labeled[:m] = True
    out = TargetSet(panel.dates, rally, crash, labeled, horizon)
    for msg in out.base_rate_warnings():
        log.warning(msg)
    return out


@dataclass(frozen=True)
class FoldSpec:
    """Inclusive row positions of one fold."""

    fold: int
    train_start: int
    train_end: int
    test_start: int
    test_end: int
    gap: int = GAP_DAYS

    @property
    def train(self) -> np.ndarray:
        return np.arange(self.train_start, self.train_end + 1)

    @property
    def test(self) -> np.ndarray:
        return np.arange(self.test_start, self.test_end + 1)

    def as_dict(self, dates=None) -> dict:
        out = {"fold": self.fold, "train": [self.train_start, self.train_end],
               "gap": self.gap, "test": [self.test_start, self.test_end]}
        if dates is not None:
            out["train_dates"] = [str(dates[self.train_start]), str(dates[self.train_end])]
            out["test_dates"] = [str(dates[self.test_start]), str(dates[self.test_end])]
        return out


def make_folds(n_rows: int, train_days: int = TRAIN_DAYS, gap_days: int = GAP_DAYS,
               test_days: int = TEST_DAYS, n_folds: int = N_FOLDS, expanding: bool = False,
               strict: bool = False) -> list[FoldSpec]:
    """Sequential folds whose test windows tile the last ``n_folds * test_days`` rows.

    Training uses the ``train_days`` rows ending ``gap_days + 1`` rows before
    the test start (all earlier rows when ``expanding``). Folds whose training
    window would start before row 0 are dropped, oldest first.
    """
    span = n_folds * test_days
    first_test = n_rows - span
    folds = []
    for k in range(n_folds):
        test_start = first_test + k * test_days
        train_end = test_start - gap_days - 1
        train_start = 0 if expanding else train_end - train_days + 1
        if train_start < 0 or train_end - train_start + 1 < train_days:
            continue
        folds.append(FoldSpec(len(folds), train_start, train_end, test_start,
                              test_start + test_days - 1, gap_days))
    if len(folds) < n_folds:
        need = train_days + gap_days + span + 1
        msg = f"{n_rows} rows support {len(folds)} of {n_folds} folds (need {need})"
        if strict or not folds:
            raise InsufficientHistoryError(msg)
        log.warning(msg)
    return folds


def assert_no_leakage(folds: list[FoldSpec], horizon: int = HORIZON) -> None:
    """Raise :class:`LeakageError` if any training label can see a test-period price.

    Checks every training row's forward window ``[t + 1, t + horizon]``
    against the fold's test range, and that test ranges are consecutive.
    """
    prev_end = None
    for f in folds:
        if not f.train_end + horizon < f.test_start:
            raise LeakageError(f"fold {f.fold}: train_end {f.train_end} + {horizon} "
                               f">= test_start {f.test_start}")
        train = f.train
        hits = (train + horizon >= f.test_start) & (train < f.test_end + 1)
        if hits.any():
            raise LeakageError(f"fold {f.fold}: label window of training row "
                               f"{int(train[hits][0])} reaches the test range")
        if prev_end is not None and f.test_start != prev_end + 1:
            raise LeakageError(f"fold {f.fold}: test windows are not consecutive")
        prev_end = f.test_end
