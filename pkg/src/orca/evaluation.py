"""Walk-forward training/prediction and the ablation harness."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, LeakageError, UndefinedMetricError
from .features import SUBSETS, FeatureMatrix
from .forest import ForestParams, apply_scaler, fit_forest, fit_scaler, predict_proba
from .labels import HORIZON, FoldSpec, TargetSet, assert_no_leakage
from .metrics import auc_roc, average_precision, bcd_auc, best_f1

log = logging.getLogger(__name__)

TASKS = ("rally", "crash")


@dataclass(frozen=True, eq=False)
class PredictionSet:
    task: str
    dates: np.ndarray
    probability: np.ndarray
    label: np.ndarray
    fold: np.ndarray


@dataclass
class WalkForwardResult:
    subset: str
    predictions: dict[str, PredictionSet]
    report: dict = field(default_factory=dict)


def fold_seed(seed: int, fold: int, task: int) -> int:
    return int(np.random.SeedSequence([seed, fold, task]).generate_state(1, np.uint64)[0] >> 1)


class AccessLog:
    """Records the row positions handed to model fitting for one fold."""

    def __init__(self, fold: FoldSpec, horizon: int):
        self.fold = fold
        self.horizon = horizon
        self.seen: list[np.ndarray] = []

    def take(self, arr: np.ndarray, rows: np.ndarray) -> np.ndarray:
        self.seen.append(np.asarray(rows))
        return arr[rows]

    def check(self) -> None:
        if not self.seen:
            return
        rows = np.concatenate(self.seen)
        f = self.fold
        bad = (rows + self.horizon >= f.test_start) & (rows <= f.test_end)
        if bad.any():
            raise LeakageError(f"fold {f.fold}: fitting touched row {int(rows[bad][0])}, "
                               f"visible from test range [{f.test_start}, {f.test_end}]")


def run_fold(x: np.ndarray, labels: dict[str, np.ndarray], fold: FoldSpec, seed: int,
             params: ForestParams, horizon: int = HORIZON,
             manifest_version: str = "") -> dict[str, np.ndarray]:
    """Fit scaler and one forest per task on the fold's training rows; predict its test rows."""
    guard = AccessLog(fold, horizon)
    train = fold.train
    x_train = guard.take(x, train)
    scaler = fit_scaler(x_train)
    z_train = apply_scaler(scaler, x_train)
    z_test = apply_scaler(scaler, x[fold.test])
    out = {}
    for k, task in enumerate(TASKS):
        y_train = guard.take(labels[task], train)
        guard.check()
        model = fit_forest(z_train, y_train, fold_seed(seed, fold.fold, k), params,
                           context=f"fold {fold.fold}, {task}",
                           manifest_version=manifest_version)
        out[task] = predict_proba(model, z_test)
    return out


def _fold_metrics(p, y) -> dict:
    try:
        thr, _, _, f1 = best_f1(p, y)
        return {"auc": auc_roc(p, y), "ap": average_precision(p, y), "best_f1": f1,
                "threshold": thr, "n": int(y.shape[0]), "positives": int(y.sum())}
    except UndefinedMetricError:
        return {"auc": None, "ap": None, "best_f1": None, "threshold": None,
                "n": int(y.shape[0]), "positives": int(y.sum()),
                "excluded": "single-class test labels"}


def score_predictions(predictions: dict[str, PredictionSet], folds: list[FoldSpec]) -> dict:
    """Pooled headline metrics, per-fold metrics and both BCD-AUC variants."""
    report: dict = {"tasks": {}}
    for task, ps in predictions.items():
        entry: dict = {"base_rate": float(ps.label.mean())}
        try:
            thr, prec, rec, f1 = best_f1(ps.probability, ps.label)
            entry.update(auc_roc=auc_roc(ps.probability, ps.label),
                         average_precision=average_precision(ps.probability, ps.label),
                         best_f1=f1, precision=prec, recall=rec, threshold=thr)
        except UndefinedMetricError as exc:
            entry.update(auc_roc=None, average_precision=None, error=str(exc))
        per_fold = []
        for f in folds:
            m = ps.fold == f.fold
            per_fold.append({"fold": f.fold, **_fold_metrics(ps.probability[m], ps.label[m])})
        aucs = [r["auc"] for r in per_fold if r["auc"] is not None]
        entry["per_fold"] = per_fold
        entry["excluded_folds"] = [r["fold"] for r in per_fold if r["auc"] is None]
        entry["mean_fold_auc"] = float(np.mean(aucs)) if aucs else None
        report["tasks"][task] = entry
    r, c = report["tasks"].get("rally", {}), report["tasks"].get("crash", {})
    if r.get("auc_roc") is not None and c.get("auc_roc") is not None:
        report["bcd_auc"] = bcd_auc(r["auc_roc"], c["auc_roc"])
    else:
        report["bcd_auc"] = None
    if r.get("mean_fold_auc") is not None and c.get("mean_fold_auc") is not None:
        report["bcd_auc_fold_mean"] = bcd_auc(r["mean_fold_auc"], c["mean_fold_auc"])
    else:
        report["bcd_auc_fold_mean"] = None
    return report


def align_labels(features: FeatureMatrix, targets: TargetSet) -> dict[str, np.ndarray]:
    pos = np.searchsorted(targets.dates, features.dates)
    if (pos >= targets.dates.shape[0]).any() or not np.array_equal(targets.dates[pos], features.dates):
        raise DataError("feature dates are not covered by the target set")
    if not targets.labeled[pos].all():
        raise DataError("feature rows include dates without labels")
    return {t: targets.task(t)[pos].astype(np.int64) for t in TASKS}


def run_walk_forward(features: FeatureMatrix, targets: TargetSet, folds: list[FoldSpec],
                     subset: str = "combined", seed: int = 0,
                     params: ForestParams = ForestParams(), jobs: int = 1,
                     horizon: int = HORIZON) -> WalkForwardResult:
    """Out-of-sample rally and crash probabilities for every fold's test rows."""
    assert_no_leakage(folds, horizon)
    if folds and folds[-1].test_end >= features.dates.shape[0]:
        raise DataError("folds extend beyond the feature matrix")
    sub = features.select(subset)
    labels = align_labels(features, targets)
    x = sub.values
    args = [(x, labels, f, seed, params, horizon, sub.version) for f in folds]
    if jobs > 1 and len(folds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outs = list(ex.map(run_fold, *zip(*args)))
    else:
        outs = [run_fold(*a) for a in args]

    predictions = {}
    for task in TASKS:
        rows = np.concatenate([f.test for f in folds])
        predictions[task] = PredictionSet(
            task, features.dates[rows], np.concatenate([o[task] for o in outs]),
            labels[task][rows], np.concatenate([np.full(f.test.shape[0], f.fold) for f in folds]))
    report = score_predictions(predictions, folds)
    report.update(subset=subset, n_features=int(x.shape[1]), seed=seed,
                  manifest_version=sub.version)
    return WalkForwardResult(subset, predictions, report)


def run_ablation(features: FeatureMatrix, targets: TargetSet, folds: list[FoldSpec],
                 seed: int = 0, params: ForestParams = ForestParams(), jobs: int = 1,
                 subsets=SUBSETS) -> dict[str, WalkForwardResult]:
    """Identical folds and seeds for each feature family."""
    return {s: run_walk_forward(features, targets, folds, s, seed, params, jobs) for s in subsets}
