import numpy as np
import pytest

from orca.data import PricePanel
from orca.errors import DataError, NumericalError
from orca.kernels import backtest as K
from orca.strategy import (ExposureParams, Regime, SignalRanks, backtest, benchmark_ledger,
                           build_ledger, calmar_ratio, defensive_returns, ensemble_wfo,
                           exposure_map, forward_returns, max_drawdown, parameter_grid,
                           percentile_rank, performance_stats, regime_series, sharpe_ratio,
                           signal_ranks)

from oracles import rank_oracle

SYMBOLS = ["SPY", "GLD", "IEF", "UUP", "QQQ"]


def make_strategy_panel(n, seed=0, equity=None):
    rng = np.random.default_rng(seed)
    r = rng.normal(0.0003, 0.01, (n - 1, len(SYMBOLS)))
    if equity is not None:
        r[:, 0] = equity
    prices = 100 * np.vstack([np.ones(len(SYMBOLS)), np.cumprod(1 + r, axis=0)])
    dates = np.busday_offset(np.datetime64("2016-01-04", "D"), np.arange(n), roll="forward")
    return PricePanel.from_prices(dates, SYMBOLS, prices)


def random_ranks(panel, seed=0, n=None):
    rng = np.random.default_rng(seed)
    n = n or panel.dates.shape[0] - 1
    return SignalRanks(panel.dates[:n], rng.integers(1, 127, n) / 126, rng.integers(1, 127, n) / 126)


@pytest.mark.parametrize("rr, rc, w, regime", [
    (0.95, 0.10, 0.0, Regime.EUPHORIA),
    (0.95, 0.90, 0.0, Regime.EUPHORIA),
    (0.50, 0.70, 0.0, Regime.CRISIS),
    (0.80, 0.20, 1.5, Regime.RALLY),
    (0.65, 0.20, 1.2, Regime.NORMAL),
    (0.30, 0.20, 1.0, Regime.NORMAL),
    (0.50, 0.50, 0.7, Regime.CAUTION),
    (0.85, 0.50, 0.3, Regime.CAUTION),
])
def test_exposure_map_cells(rr, rc, w, regime):
    assert exposure_map(rr, rc) == (w, regime)
    got_w, got_c = K._cell_numba(rr, rc, ExposureParams().to_array())
    assert (got_w, got_c) == (w, int(regime))


def test_exposure_map_respects_leverage_cap():
    assert exposure_map(0.8, 0.2, ExposureParams(max_leverage=1.2))[0] == 1.2
    with pytest.raises(ValueError):
        ExposureParams(crash_exit=1.2)
    with pytest.raises(ValueError):
        ExposureParams(sweet_exposure=2.0)
    p = ExposureParams(min_hold=13, base_exposure=0.8)
    assert ExposureParams.from_array(p.to_array()) == p


def test_percentile_rank_examples():
    up = percentile_rank(np.arange(300.0))
    assert np.isnan(up[:125]).all() and (up[125:] == 1.0).all()
    down = percentile_rank(-np.arange(300.0))
    assert (down[125:] == 1 / 126).all()
    x = np.random.default_rng(0).random(400).round(2)  # ties included
    assert np.array_equal(percentile_rank(x, 30), np.array(rank_oracle(list(x), 30)),
                          equal_nan=True)
    sr = signal_ranks(np.arange(300), np.arange(300.0), -np.arange(300.0))
    assert sr.dates[0] == 125 and sr.rally.shape == (175,) and (sr.crash == 1 / 126).all()


def test_regime_series_bands():
    w = np.array([1.5, 1.2, 0.7, 0.3, 0.0, 0.0, 1.0, 0.0])
    cell = np.array([1, 0, 2, 2, 3, 0, 0, 4])
    out = regime_series(w, cell)
    assert [Regime(c).label for c in out] == ["Rally", "Normal", "Caution", "Caution",
                                              "Euphoria", "Euphoria", "Normal", "Crisis"]


def test_hold_timer_and_exit_override():
    # targets: 1.0, then 1.5 for a while (held back by the timer), then an exit
    rr = np.array([0.3] + [0.8] * 12 + [0.95] + [0.3] * 3)
    rc = np.full(rr.shape, 0.1)
    p = ExposureParams(min_hold=8).to_array()
    for fn in (K._paths_numba, K._paths_numpy):
        w, target, _ = fn(rr, rc, p[None, :])
        w = w[0]
        assert (w[:8] == 1.0).all() and w[8] == 1.5
        assert w[13] == 0.0  # exit applies at once
        assert (w[14:] == 0.0).all()  # and is then held
        assert ((target[0] == 0) <= (w == 0)).all()


def test_defensive_sleeve_and_missing_asset():
    panel = make_strategy_panel(50)
    r = panel.returns
    assert np.allclose(defensive_returns(panel), 0.5 * r[:, 1] + 0.3 * r[:, 2] + 0.2 * r[:, 3],
                       rtol=0, atol=1e-17)
    bad = PricePanel.from_prices(panel.dates, ["SPY", "GLD"], panel.prices[:, :2])
    with pytest.raises(DataError, match="IEF"):
        defensive_returns(bad)
    with pytest.raises(DataError):
        forward_returns(panel, panel.dates[-1:], "SPY")


def test_ledger_identities():
    panel = make_strategy_panel(300, seed=1)
    ranks = random_ranks(panel, 1)
    led = backtest(ranks, panel)
    recomputed = np.cumprod(1 + led.exposure * led.equity_return
                            + led.defensive_weight * led.defensive_return
                            - led.transaction_cost - led.leverage_cost)
    assert np.max(np.abs(recomputed - led.wealth)) < 1e-10
    assert np.allclose(led.wealth[1:], led.wealth[:-1] * (1 + led.net_return[1:]), rtol=1e-14)
    assert (led.transaction_cost >= 0).all() and (led.leverage_cost >= 0).all()
    assert ((led.exposure >= 0) & (led.exposure <= 1.5)).all()
    quiet = (np.diff(led.exposure, prepend=led.exposure[0]) == 0) & (led.exposure <= 1)
    assert (led.transaction_cost[quiet] == 0).all() and (led.leverage_cost[quiet] == 0).all()
    targets, _ = K._cell_numpy(ranks.rally, ranks.crash, ExposureParams().to_array())
    assert (led.exposure[targets == 0] == 0).all()


def test_constant_exposures_reproduce_reference_portfolios():
    panel = make_strategy_panel(200, seed=2)
    dates = panel.dates[:-1]
    req, rdef = forward_returns(panel, dates, "SPY")
    one = build_ledger(dates, np.ones(199), np.zeros(199), req, rdef)
    assert np.array_equal(one.wealth, np.cumprod(1 + req))
    zero = build_ledger(dates, np.zeros(199), np.ones(199), req, rdef)
    assert np.array_equal(zero.wealth, np.cumprod(1 + rdef))
    ranks = SignalRanks(dates, np.full(199, 0.5), np.full(199, 0.1))
    bench = benchmark_ledger(ranks, panel)
    assert np.array_equal(bench.net_return, req)
    assert np.allclose(bench.wealth, panel.prices[1:, 0] / panel.prices[0, 0], rtol=1e-12)
    assert (bench.transaction_cost == 0).all() and (bench.leverage_cost == 0).all()


def test_single_switch_costs_five_bps_on_the_day():
    dates = np.arange(4)
    led = build_ledger(dates, [1.0, 1.0, 0.0, 0.0], [0, 0, 1, 1], np.zeros(4), np.zeros(4))
    assert led.transaction_cost.tolist() == [0.0, 0.0, 0.0005, 0.0]
    assert led.wealth[-1] == pytest.approx(1 - 0.0005, abs=1e-16)
    lev = build_ledger(dates, [1.5] * 4, [0] * 4, np.zeros(4), np.zeros(4))
    assert lev.leverage_cost == pytest.approx(np.full(4, 0.005 / 252 * 0.5))


def test_performance_stats():
    rf = np.full(100, 0.04 / 252)
    assert sharpe_ratio(rf) == 0.0
    with pytest.raises(NumericalError):
        sharpe_ratio(np.full(100, 0.001))
    net = np.array([0.01, -0.02, 0.015, 0.0])
    assert sharpe_ratio(net) == pytest.approx(
        (net.mean() - 0.04 / 252) / net.std(ddof=1) * np.sqrt(252))
    rising = np.cumprod(np.full(50, 1.001))
    assert max_drawdown(rising) == 0.0
    assert calmar_ratio(0.1, 0.0) == float("inf")
    assert calmar_ratio(0.156, -0.075) == pytest.approx(2.08, abs=0.01)
    assert max_drawdown(np.array([0.9, 1.2, 0.6])) == pytest.approx(-0.5)
    r = 0.0005 + 0.0001 * (np.arange(252) % 2)
    led = build_ledger(np.arange(252), np.ones(252), np.zeros(252), r, np.zeros(252))
    st = performance_stats(led)
    assert st.cagr == pytest.approx(np.prod(1 + r) - 1) and st.calmar == float("inf")
    assert st.max_drawdown == 0.0


def test_exp_transform_leaves_ledger_identical():
    panel = make_strategy_panel(400, seed=3)
    rng = np.random.default_rng(3)
    pr, pc = rng.random(399), rng.random(399) * 0.2
    a = backtest(signal_ranks(panel.dates[:-1], pr, pc), panel)
    b = backtest(signal_ranks(panel.dates[:-1], np.exp(pr), np.exp(pc)), panel)
    fa, fb = a.to_frame(), b.to_frame()
    assert fa.equals(fb)


def test_grid_lattice():
    g = parameter_grid()
    assert g.shape == (45360, len(K.PARAM_COLUMNS))
    assert np.unique(g, axis=0).shape[0] == 45360
    with pytest.raises(ValueError):
        parameter_grid({"nonsense": (1,)})


def test_ensemble_envelope_and_report():
    panel = make_strategy_panel(700, seed=4)
    ranks = random_ranks(panel, 4)
    grid = parameter_grid({"crash_exit": (0.5, 0.6, 0.7), "min_hold": (5, 8),
                           "rally_entry": (0.7, 0.78)})
    res = ensemble_wfo(ranks, panel, grid, top_k=5)
    lo, hi = res.member_exposure.min(axis=0), res.member_exposure.max(axis=0)
    assert ((res.ledger.exposure >= lo) & (res.ledger.exposure <= hi)).all()
    assert res.split == int(0.55 * 699)
    assert res.report["oos_start"] == str(ranks.dates[res.split])
    assert len(res.report["top_params"]) == 5
    s = res.report["top_params"]
    assert all(a["in_sample_sharpe"] >= b["in_sample_sharpe"] for a, b in zip(s, s[1:]))


def test_degenerate_grid_collapses_to_single_member():
    panel = make_strategy_panel(500, seed=5)
    ranks = random_ranks(panel, 5)
    p = ExposureParams(min_hold=5)
    res = ensemble_wfo(ranks, panel, np.tile(p.to_array(), (20, 1)), top_k=20)
    single = backtest(ranks, panel, p)
    assert np.array_equal(res.ledger.exposure, single.exposure)
    assert np.array_equal(res.ledger.wealth, single.wealth)


def test_too_few_feasible_sets_warns(caplog):
    panel = make_strategy_panel(300, seed=6)
    res = ensemble_wfo(random_ranks(panel, 6), panel, parameter_grid({"min_hold": (5, 8)}))
    assert res.report["top_k"] == 2 and "feasible" in caplog.text


def _oos_sharpes(ranks, panel, grid, split):
    req, rdef = forward_returns(panel, ranks.dates, "SPY")
    w, _, _ = K.exposure_paths(ranks.rally, ranks.crash, grid)
    out = []
    for k in range(grid.shape[0]):
        dw = grid[k, K.DEF_SCALE] * np.maximum(0, 1 - w[k])
        led = build_ledger(ranks.dates, w[k], dw, req, rdef).segment(split)
        out.append(sharpe_ratio(led.net_return))
    return np.array(out)


@pytest.mark.slow
def test_ensemble_beats_median_single_set():
    grid = parameter_grid({"crash_exit": (0.5, 0.6, 0.7, 0.8, 0.9),
                           "crash_caution": (0.3, 0.4, 0.5),
                           "rally_exit": (0.85, 0.9, 0.95), "min_hold": (5, 8, 13)})
    wins = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        n = 1200
        # ranks persist over 10-day blocks, like a slowly moving signal
        rr = np.repeat(rng.integers(1, 127, n // 10) / 126, 10)
        rc = np.repeat(rng.integers(1, 127, n // 10) / 126, 10)
        # one profitable rule: step out when the crash rank is in its top fifth
        eq = rng.normal(0.0005, 0.01, n) - 0.01 * (rc > 0.8)
        panel = make_strategy_panel(n + 1, seed, equity=eq)
        ranks = SignalRanks(panel.dates[:n], rr, rc)
        res = ensemble_wfo(ranks, panel, grid, top_k=20)
        ens = res.report["out_of_sample"]["sharpe"]
        wins += ens >= np.median(_oos_sharpes(ranks, panel, grid, res.split))
    assert wins == 10
