"""Rolling Pearson and exponentially weighted correlation snapshots."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import PricePanel, window_at

ROLL60 = "roll60"
ROLL120 = "roll120"
EWM30 = "ewm30"
ESTIMATORS = (ROLL60, ROLL120, EWM30)

EWM_HALF_LIFE = 30.0
EWM_WARMUP = 60
EWM_EFFECTIVE_T = 60
# weights below this fraction of the newest one are dropped from the EWM sum
EWM_WEIGHT_FLOOR = 1e-16
ZERO_VAR = 1e-24


@dataclass(frozen=True, eq=False)
class CorrelationSnapshot:
    matrix: np.ndarray
    estimator: str
    as_of: np.datetime64
    effective_T: int
    degenerate: tuple[int, ...] = field(default=())

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def finalize(cov: np.ndarray) -> tuple[np.ndarray, tuple[int, ...]]:
    """Covariance to correlation: symmetrise, unit diagonal, clip to [-1, 1].

    Assets with (numerically) zero variance get zero off-diagonal entries.
    """
    var = np.diag(cov).copy()
    dead = var <= ZERO_VAR
    sd = np.sqrt(np.where(dead, 1.0, var))
    c = cov / np.outer(sd, sd)
    c = 0.5 * (c + c.T)
    c[dead, :] = 0.0
    c[:, dead] = 0.0
    np.clip(c, -1.0, 1.0, out=c)
    np.fill_diagonal(c, 1.0)
    return c, tuple(int(i) for i in np.flatnonzero(dead))


def pearson(x: np.ndarray) -> tuple[np.ndarray, tuple[int, ...]]:
    """Correlation of the columns of ``x`` using window means."""
    d = x - x.mean(axis=0)
    return finalize(d.T @ d / x.shape[0])


def ewm_weights(length: int, half_life: float) -> np.ndarray:
    """Weights oldest→newest, newest = 1, decaying by 2**(-1/half_life) per step."""
    lam = 2.0 ** (-1.0 / half_life) if np.isfinite(half_life) else 1.0
    return lam ** np.arange(length - 1, -1, -1, dtype=np.float64)


def ewm(x: np.ndarray, half_life: float = EWM_HALF_LIFE) -> tuple[np.ndarray, tuple[int, ...]]:
    """Exponentially weighted correlation of the columns of ``x`` (rows oldest first).

    Both the means and the second moments are weighted.
    """
    w = ewm_weights(x.shape[0], half_life)
    w = w / w.sum()
    mu = w @ x
    d = x - mu
    return finalize((d * w[:, None]).T @ d)


def ewm_lookback(half_life: float = EWM_HALF_LIFE) -> int:
    return int(np.ceil(half_life * np.log2(1.0 / EWM_WEIGHT_FLOOR))) + 1


def rolling_correlation_at(panel: PricePanel, pos: int, length: int) -> CorrelationSnapshot:
    c, dead = pearson(window_at(panel, pos, length))
    return CorrelationSnapshot(c, f"roll{length}", panel.dates[pos], length, dead)


def ewm_correlation_at(panel: PricePanel, pos: int, half_life: float = EWM_HALF_LIFE,
                       lookback: int | None = None) -> CorrelationSnapshot:
    """EWM correlation from all history up to ``pos`` (or the last ``lookback`` rows).

    Rows whose weight is below ``EWM_WEIGHT_FLOOR`` are skipped.
    """
    window_at(panel, pos, EWM_WARMUP)
    if lookback is None:
        lookback = min(pos, ewm_lookback(half_life)) if np.isfinite(half_life) else pos
    c, dead = ewm(window_at(panel, pos, lookback), half_life)
    name = EWM30 if half_life == EWM_HALF_LIFE else f"ewm{half_life:g}"
    return CorrelationSnapshot(c, name, panel.dates[pos], EWM_EFFECTIVE_T, dead)


def rolling_correlation(panel: PricePanel, end_date, length: int = 60) -> CorrelationSnapshot:
    return rolling_correlation_at(panel, panel.position(end_date), length)


def ewm_correlation(panel: PricePanel, end_date, half_life: float = EWM_HALF_LIFE,
                    lookback: int | None = None) -> CorrelationSnapshot:
    return ewm_correlation_at(panel, panel.position(end_date), half_life, lookback)


def snapshots_at(panel: PricePanel, pos: int) -> tuple[CorrelationSnapshot, ...]:
    """The three estimator snapshots at one date, in ``ESTIMATORS`` order."""
    return (
        rolling_correlation_at(panel, pos, 60),
        rolling_correlation_at(panel, pos, 120),
        ewm_correlation_at(panel, pos),
    )
