import json
import os
import subprocess
import sys

import numpy as np
import pytest

from orca.errors import DataError, SingleClassError
from orca.forest import (ForestModel, ForestParams, apply_scaler, balanced_weights, fit_forest,
                         fit_scaler, predict_proba, weighted_gini)
from orca.kernels import tree
from orca.metrics import auc_roc

SMALL = ForestParams(n_trees=40, max_depth=4, min_leaf=5, min_split=10)


def _data(seed, n=600, d=6, signal=True):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    y = (x[:, 0] > 0.8).astype(int) if signal else rng.integers(0, 2, n)
    return x, y


def test_scaler_centres_and_scales():
    x = np.column_stack([np.arange(1.0, 10.0), np.full(9, 3.0), np.arange(9.0) ** 2])
    s = fit_scaler(x)
    assert s.median.tolist() == [5.0, 3.0, 16.0]
    assert s.iqr[0] == 4.0
    z = apply_scaler(s, x)
    q25, med, q75 = np.percentile(z, [25, 50, 75], axis=0)
    assert np.allclose(med, 0, atol=1e-9)
    assert np.allclose((q75 - q25)[[0, 2]], 1, atol=1e-9)
    assert (z[:, 1] == 0).all()
    bad = apply_scaler(s, np.array([[np.nan, np.inf, 1.0]]))
    assert bad[0, 0] == 0 and bad[0, 1] == 0
    with pytest.raises(DataError):
        fit_scaler(x[:1])


def test_gini_and_weights():
    assert weighted_gini(5, 0) == 0 and weighted_gini(0, 3) == 0
    assert weighted_gini(2.5, 2.5) == 0.5
    assert weighted_gini(0, 0) == 0
    w = balanced_weights(np.array([0, 0, 0, 1]))
    assert w.tolist() == [4 / 6, 2.0]
    assert balanced_weights(np.array([1, 1]))[0] == 0


def test_hand_traced_stump():
    xt = np.array([[1.0, 2.0, 3.0, 4.0]])
    y = np.array([0, 0, 1, 1])
    out = tree.grow_tree(xt, y, np.ones(4, dtype=int), np.ones(2), np.zeros((3, 1), dtype=int),
                         1, 1, 2)
    feat, thr, left, right, value, count, n_nodes = out
    assert n_nodes == 3
    assert feat[0] == 0 and thr[0] == 2.5
    assert (left[0], right[0]) == (1, 2)
    assert value[:3].tolist() == [0.5, 0.0, 1.0]
    assert count[:3].tolist() == [4, 2, 2]
    assert feat[1] == -1 and feat[2] == -1


def test_min_leaf_blocks_split():
    xt = np.array([[1.0, 2.0, 3.0, 4.0]])
    y = np.array([0, 1, 1, 1])
    out = tree.grow_tree(xt, y, np.ones(4, dtype=int), np.ones(2), np.zeros((3, 1), dtype=int),
                         1, 2, 2)
    assert out[0][0] == 0 and out[1][0] == 2.5  # the 1/3 split is excluded by min_leaf 2


def test_duplicated_rows_give_same_tree():
    x, y = _data(1, n=200)
    xt = np.ascontiguousarray(x.T)
    draws = np.tile(np.arange(6), (63, 1))
    one = tree.grow_tree(xt, y, np.ones(200, dtype=int), np.array([1.0, 2.0]), draws, 5, 1, 2)
    two = tree.grow_tree(xt, y, np.full(200, 2), np.array([1.0, 2.0]), draws, 5, 1, 2)
    for a, b in zip(one[:5], two[:5]):
        assert np.array_equal(a, b)
    assert np.array_equal(two[5], 2 * one[5])


def test_separable_and_noise():
    x, y = _data(0, n=400)
    model = fit_forest(x, y, 1, SMALL)
    assert auc_roc(predict_proba(model, x), y) == 1.0
    aucs = []
    for seed in range(20):
        x, y = _data(100 + seed, n=5000, d=5, signal=False)
        m = fit_forest(x[:2500], y[:2500], seed, ForestParams(n_trees=20, max_depth=4))
        aucs.append(auc_roc(predict_proba(m, x[2500:]), y[2500:]))
    assert 0.45 <= np.mean(aucs) <= 0.55


def test_monotone_transform_invariance():
    x, y = _data(2)
    a = fit_forest(x, y, 5, SMALL)
    b = fit_forest(np.exp(x), y, 5, SMALL)
    for k in ("feature", "left", "right", "value", "count"):
        assert np.array_equal(getattr(a, k), getattr(b, k))
    # with every row in-bag, routing of the training rows is unchanged too
    xt = np.ascontiguousarray(x.T)
    draws = np.tile(np.arange(6), (31, 1))
    args = (y, np.ones(600, dtype=int), np.ones(2), draws, 4, 5, 10)
    ta = tree.grow_tree(xt, *args)
    tb = tree.grow_tree(np.exp(xt), *args)
    pa = tree.predict_forest(x, *[np.atleast_2d(v) for v in ta[:5]])
    pb = tree.predict_forest(np.exp(x), *[np.atleast_2d(v) for v in tb[:5]])
    assert np.array_equal(pa, pb)


def test_depth_zero_is_balanced_root():
    x, y = _data(3)
    m = fit_forest(x, y, 0, ForestParams(n_trees=5, max_depth=0))
    assert np.allclose(predict_proba(m, x), 0.5)


def test_determinism_and_seed_sensitivity():
    x, y = _data(4)
    a = predict_proba(fit_forest(x, y, 9, SMALL), x)
    assert np.array_equal(a, predict_proba(fit_forest(x, y, 9, SMALL), x))
    assert not np.array_equal(a, predict_proba(fit_forest(x, y, 10, SMALL), x))
    assert ((a >= 0) & (a <= 1)).all()


def test_errors():
    x, y = _data(5)
    with pytest.raises(SingleClassError, match="fold 3"):
        fit_forest(x, np.zeros(len(y), dtype=int), 0, SMALL, context="fold 3")
    m = fit_forest(x, y, 0, SMALL)
    with pytest.raises(DataError):
        predict_proba(m, x[:, :5])


def test_save_load_roundtrip(tmp_path):
    x, y = _data(6)
    m = fit_forest(x, y, 3, SMALL, manifest_version="m1-abc")
    path = tmp_path / "model.npz"
    m.save(path)
    back = ForestModel.load(path)
    assert back.params == SMALL and back.seed == 3 and back.manifest_version == "m1-abc"
    assert np.array_equal(predict_proba(back, x), predict_proba(m, x))


def test_backends_agree_in_process():
    x, y = _data(7, n=300)
    xt = np.ascontiguousarray(x.T)
    rng = np.random.default_rng(0)
    mult = np.bincount(rng.integers(0, 300, 300), minlength=300)
    draws = np.sort(rng.random((63, 6)).argsort(axis=1)[:, :3], axis=1)
    cw = balanced_weights(np.repeat(y, mult))
    args = (xt, y.astype(np.int64), mult, tree.presort(xt), cw, draws, 5, 5, 10)
    a = tree._grow_numba(*args)
    b = tree._grow_numpy(*args)
    for u, v in zip(a, b):
        assert np.array_equal(u, v)
    pa = tree._predict_numba(x, *[np.atleast_2d(arr) for arr in (a[0], a[1], a[2], a[3], a[4])])
    pb = tree._predict_numpy(x, *[np.atleast_2d(arr) for arr in (a[0], a[1], a[2], a[3], a[4])])
    assert np.array_equal(pa, pb)


def test_backends_agree_across_processes():
    code = ("import json, numpy as np; from orca.forest import *; from orca._accel import backend;"
            "r=np.random.default_rng(0); x=r.standard_normal((300,5)); y=(x[:,0]>0.3).astype(int);"
            "m=fit_forest(x,y,4,ForestParams(n_trees=10,max_depth=4,min_leaf=5,min_split=10));"
            "print(json.dumps([backend(), predict_proba(m,x).tolist()]))")
    outs = {}
    for flag in ("0", "1"):
        env = dict(os.environ, ORCA_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        name, p = json.loads(res.stdout)
        outs[name] = p
    assert set(outs) == {"numba", "numpy"}
    assert outs["numba"] == outs["numpy"]
