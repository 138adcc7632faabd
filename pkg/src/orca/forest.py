"""Robust scaling and a class-balanced random forest."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, SingleClassError
from .kernels.tree import grow_tree, max_nodes_for_depth, predict_forest, presort

IQR_FLOOR = 1e-12
FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class ScalerState:
    median: np.ndarray
    iqr: np.ndarray


def fit_scaler(x: np.ndarray) -> ScalerState:
    """Per-column median and inter-quartile range, ignoring non-finite entries."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 2:
        raise DataError("robust scaler needs at least 2 rows")
    clean = np.where(np.isfinite(x), x, np.nan)
    q25, med, q75 = np.nanpercentile(clean, [25, 50, 75], axis=0)
    med = np.nan_to_num(med)
    iqr = np.maximum(np.nan_to_num(q75 - q25), IQR_FLOOR)
    return ScalerState(med, iqr)


def apply_scaler(state: ScalerState, x: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", over="ignore"):
        z = (np.asarray(x, dtype=np.float64) - state.median) / state.iqr
    z[~np.isfinite(z)] = 0.0
    return z


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 200
    max_depth: int = 6
    min_leaf: int = 30
    min_split: int = 60


@dataclass(frozen=True, eq=False)
class ForestModel:
    feature: np.ndarray  # (n_trees, max_nodes)
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    n_features: int
    seed: int
    params: ForestParams = field(default_factory=ForestParams)
    manifest_version: str = ""

    @property
    def n_trees(self) -> int:
        return self.feature.shape[0]

    def save(self, path: str | Path) -> None:
        """``.npz`` with the node arrays plus a JSON ``meta`` entry."""
        meta = {"format": FORMAT_VERSION, "n_features": self.n_features, "seed": self.seed,
                "manifest_version": self.manifest_version, "params": self.params.__dict__}
        np.savez_compressed(path, feature=self.feature, threshold=self.threshold,
                            left=self.left, right=self.right, value=self.value,
                            count=self.count, meta=np.array(json.dumps(meta, sort_keys=True)))

    @classmethod
    def load(cls, path: str | Path) -> "ForestModel":
        with np.load(path) as z:
            meta = json.loads(str(z["meta"]))
            if meta["format"] != FORMAT_VERSION:
                raise DataError(f"{path}: unsupported model format {meta['format']}")
            return cls(z["feature"], z["threshold"], z["left"], z["right"], z["value"],
                       z["count"], meta["n_features"], meta["seed"],
                       ForestParams(**meta["params"]), meta["manifest_version"])


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    """Counter-based stream for one tree: Philox keyed by ``seed ^ tree_index``."""
    return np.random.Generator(np.random.Philox(key=int(seed) ^ int(tree_index)))


def weighted_gini(w0: float, w1: float) -> float:
    """Gini impurity of a node holding class weights ``w0`` and ``w1``."""
    total = w0 + w1
    if total <= 0:
        return 0.0
    p = w1 / total
    return 2.0 * p * (1.0 - p)


def balanced_weights(y_boot: np.ndarray) -> np.ndarray:
    """``N / (2 * count_c)`` per class of a bootstrap sample (0 for absent classes)."""
    counts = np.bincount(y_boot, minlength=2).astype(np.float64)
    with np.errstate(divide="ignore"):
        w = y_boot.shape[0] / (2.0 * counts)
    return np.where(counts > 0, w, 0.0)


def draw_tree(rng: np.random.Generator, n_rows: int, n_features: int, mtry: int,
              max_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Bootstrap multiplicities and per-node candidate features for one tree."""
    boot = rng.integers(0, n_rows, n_rows)
    mult = np.bincount(boot, minlength=n_rows)
    keys = rng.random((max_nodes, n_features))
    if mtry < n_features:
        draws = np.argpartition(keys, mtry - 1, axis=1)[:, :mtry]
    else:
        draws = np.broadcast_to(np.arange(n_features), (max_nodes, n_features))
    return mult, np.sort(draws, axis=1)


def fit_forest(x: np.ndarray, y: np.ndarray, seed: int, params: ForestParams = ForestParams(),
               context: str = "", manifest_version: str = "") -> ForestModel:
    """Bootstrap CART ensemble with per-bootstrap balanced class weights.

    Each split considers ``ceil(sqrt(d))`` features; leaf/split minimums are
    checked on raw (multiplicity-counted) sample counts.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if np.unique(y).shape[0] < 2:
        raise SingleClassError(f"single-class training labels{' (' + context + ')' if context else ''}")
    n, d = x.shape
    mtry = int(np.ceil(np.sqrt(d)))
    max_nodes = max_nodes_for_depth(params.max_depth)
    xt = np.ascontiguousarray(x.T)
    order = presort(xt)
    shape = (params.n_trees, max_nodes)
    out = {k: np.empty(shape, dtype=np.int64) for k in ("feature", "left", "right", "count")}
    out.update({k: np.empty(shape) for k in ("threshold", "value")})
    for t in range(params.n_trees):
        mult, draws = draw_tree(tree_rng(seed, t), n, d, mtry, max_nodes)
        cw = balanced_weights(np.repeat(y, mult))
        feat, thr, lft, rgt, val, cnt, _ = grow_tree(
            xt, y, mult, cw, draws, params.max_depth, params.min_leaf, params.min_split, order)
        out["feature"][t], out["threshold"][t] = feat, thr
        out["left"][t], out["right"][t] = lft, rgt
        out["value"][t], out["count"][t] = val, cnt
    return ForestModel(out["feature"], out["threshold"], out["left"], out["right"],
                       out["value"], out["count"], d, int(seed), params, manifest_version)


def predict_proba(model: ForestModel, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.n_features:
        raise DataError(f"row has {x.shape[1]} features, model expects {model.n_features}")
    p = predict_forest(x, model.feature, model.threshold, model.left, model.right, model.value)
    return np.clip(p, 0.0, 1.0)
