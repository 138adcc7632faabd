import numpy as np
import pytest

from orca.labels import make_targets
from orca.synthetic import SyntheticSpec, synthetic_panel


@pytest.fixture(scope="module")
def generated():
    return synthetic_panel(0)


def test_shape_and_schedule(generated):
    panel, truth = generated
    assert panel.prices.shape == (3000, 24)
    gaps = np.diff(truth.crash_starts)
    assert (gaps >= 150).all() and (gaps <= 220).all()
    assert truth.crash_starts.shape[0] == truth.spike_windows.shape[0] + truth.vol_windows.shape[0]
    assert truth.vol_windows.shape[0] == truth.crash_starts.shape[0] // 4


def test_crash_is_ten_percent(generated):
    panel, truth = generated
    p = panel.prices[:, panel.column("SPY")]
    for c in truth.crash_starts:
        assert p[c + 2] / p[c - 1] - 1 == pytest.approx(-0.10, abs=1e-12)


def test_spike_raises_correlation_but_not_dispersion(generated):
    panel, truth = generated
    r = panel.returns
    others = [i for i, s in enumerate(panel.symbols) if s != "SPY"]
    inside = np.zeros(r.shape[0], dtype=bool)
    for lo, hi in truth.spike_windows:
        inside[lo - 1:hi - 1] = True
    calm = ~inside
    def mean_corr(rows):
        c = np.corrcoef(r[rows][:, others], rowvar=False)
        return c[np.triu_indices_from(c, 1)].mean()
    assert mean_corr(inside) > 0.75 and mean_corr(calm) < 0.35
    disp_in = r[inside][:, others].std(axis=1).mean()
    disp_out = r[calm][:, others].std(axis=1).mean()
    assert disp_in == pytest.approx(disp_out, rel=0.1)


def test_crash_labels_sit_inside_precursors(generated):
    panel, truth = generated
    t = make_targets(panel, "SPY")
    pos = np.flatnonzero(t.crash)
    windows = np.vstack([truth.spike_windows, truth.vol_windows])
    # an episode runs from the precursor start through the crash days
    covered = [((windows[:, 0] <= q) & (q < windows[:, 1] + 3)).any() for q in pos]
    assert np.mean(covered) > 0.95
    assert 0.02 < t.crash[t.labeled].mean() < 0.08


def test_seed_reproducible():
    a, _ = synthetic_panel(7, SyntheticSpec(n_days=600))
    b, _ = synthetic_panel(7, SyntheticSpec(n_days=600))
    assert np.array_equal(a.prices, b.prices)
