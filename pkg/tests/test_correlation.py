import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orca.correlation import (EWM30, ESTIMATORS, ewm, ewm_correlation, ewm_correlation_at,
                              ewm_weights, finalize, pearson, rolling_correlation,
                              snapshots_at)
from orca.data import PricePanel
from orca.errors import WindowUnavailableError

from conftest import make_panel
from oracles import pearson_oracle


def _check_valid(c):
    n = c.shape[0]
    assert np.allclose(c, c.T, atol=1e-12, rtol=0)
    assert np.all(np.diag(c) == 1.0)
    assert np.trace(c) == n
    assert np.all(c <= 1.0) and np.all(c >= -1.0)


def test_pearson_matches_loop_oracle():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((40, 6)) @ rng.standard_normal((6, 6))
    c, dead = pearson(x)
    assert dead == ()
    assert np.allclose(c, pearson_oracle(x), atol=1e-12)
    _check_valid(c)


def test_identical_and_negated_assets():
    rng = np.random.default_rng(1)
    a = rng.standard_normal(60)
    x = np.column_stack([a, a, -a, rng.standard_normal(60)])
    c, _ = pearson(x)
    assert c[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert c[0, 2] == pytest.approx(-1.0, abs=1e-12)


def test_constant_asset_is_flagged_and_decoupled():
    rng = np.random.default_rng(2)
    x = np.column_stack([rng.standard_normal(60), np.zeros(60), rng.standard_normal(60)])
    c, dead = pearson(x)
    assert dead == (1,)
    assert c[1, 0] == 0.0 and c[1, 1] == 1.0
    _check_valid(c)


def test_noise_off_diagonal_mean_near_zero():
    for seed in range(200):
        x = np.random.default_rng(seed).standard_normal((60, 24))
        c, _ = pearson(x)
        off = c[~np.eye(24, dtype=bool)]
        assert abs(off.mean()) < 0.05, seed


def test_ewm_infinite_half_life_is_pearson():
    x = np.random.default_rng(4).standard_normal((90, 5))
    assert np.allclose(ewm(x, math.inf)[0], pearson(x)[0], atol=1e-6)


def test_ewm_common_series_all_ones():
    a = np.random.default_rng(5).standard_normal(80)
    c, _ = ewm(np.column_stack([a] * 4), 30.0)
    assert np.allclose(c, 1.0, atol=1e-12)


def test_ewm_half_life_weight_ratio():
    w = ewm_weights(100, 30.0)
    assert w[-1] / w[-31] == pytest.approx(2.0, abs=1e-12)
    assert np.all(np.diff(w) > 0)


def test_ewm_matches_weighted_oracle():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((50, 3))
    lam = 2 ** (-1 / 30)
    w = np.array([lam ** (49 - t) for t in range(50)])
    w /= w.sum()
    mu = [sum(w[t] * x[t, i] for t in range(50)) for i in range(3)]
    cov = np.array([[sum(w[t] * (x[t, i] - mu[i]) * (x[t, j] - mu[j]) for t in range(50))
                     for j in range(3)] for i in range(3)])
    sd = np.sqrt(np.diag(cov))
    assert np.allclose(ewm(x, 30.0)[0], cov / np.outer(sd, sd), atol=1e-12)


def test_snapshots_at_and_date_api():
    panel = make_panel(n_days=300, n_assets=6)
    pos = 200
    snaps = snapshots_at(panel, pos)
    assert [s.estimator for s in snaps] == list(ESTIMATORS)
    assert [s.effective_T for s in snaps] == [60, 120, 60]
    for s in snaps:
        assert s.as_of == panel.dates[pos]
        _check_valid(s.matrix)
    r = rolling_correlation(panel, panel.dates[pos], 60)
    assert np.array_equal(r.matrix, snaps[0].matrix)
    e = ewm_correlation(panel, panel.dates[pos])
    assert e.estimator == EWM30 and np.array_equal(e.matrix, snaps[2].matrix)


def test_ewm_truncation_is_invisible():
    panel = make_panel(n_days=1500, n_assets=4)
    pos = 1400
    full = ewm_correlation_at(panel, pos, lookback=pos)
    assert np.allclose(full.matrix, ewm_correlation_at(panel, pos).matrix, atol=1e-13)


def test_causal_snapshot_unchanged_by_future_rows():
    big = make_panel(n_days=300, n_assets=5, seed=9)
    small = PricePanel.from_prices(big.dates[:201], big.symbols, big.prices[:201])
    for a, b in zip(snapshots_at(big, 200), snapshots_at(small, 200)):
        assert np.array_equal(a.matrix, b.matrix)


def test_window_unavailable_early():
    panel = make_panel(n_days=300, n_assets=3)
    with pytest.raises(WindowUnavailableError):
        snapshots_at(panel, 100)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 8), st.integers(3, 40))
def test_finalize_invariants(seed, n, t):
    x = np.random.default_rng(seed).standard_normal((t, n))
    x[:, 0] *= 1e-9
    c, _ = pearson(x)
    _check_valid(c)
    c2, _ = finalize(np.cov(x, rowvar=False))
    _check_valid(c2)
