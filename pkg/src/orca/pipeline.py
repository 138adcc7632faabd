"""Pipeline stages behind the CLI. Each stage writes hash-stamped artifacts and
reuses earlier stages' artifacts when their hashes match."""
from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import io
from .config import RunConfig, dump_config
from .data import PricePanel, load_panel
from .errors import ConfigError, DataError, ManifestError
from .evaluation import TASKS, PredictionSet, run_walk_forward, score_predictions
from .features import FeatureMatrix, build_features, manifest_version
from .labels import make_folds, make_targets
from .strategy import (EnsembleResult, ensemble_wfo, parameter_grid, signal_ranks)
from .synthetic import SyntheticSpec, synthetic_panel

log = logging.getLogger(__name__)


def out_dir(cfg: RunConfig) -> Path:
    return Path(cfg.out)


def meta(cfg: RunConfig, stage: str, **extra) -> dict:
    return {"config_hash": cfg.config_hash, "stage_hash": cfg.stage_hash(stage),
            "seed": cfg.seed, **extra}


def load_data(cfg: RunConfig) -> PricePanel:
    d = cfg.data
    if d.path:
        return load_panel(d.path, d.universe, d.min_rows)
    panel, _ = synthetic_panel(d.synthetic_seed, SyntheticSpec(n_days=d.synthetic_days),
                               symbols=d.universe, index_symbol=d.index_symbol)
    return panel


def _feature_cache(cfg: RunConfig) -> Path:
    return out_dir(cfg) / "cache" / f"features-{cfg.stage_hash('features')}.csv"


def _features_frame(fm: FeatureMatrix) -> pd.DataFrame:
    frame = pd.DataFrame(fm.values, columns=list(fm.names))
    frame.insert(0, "date", fm.dates.astype(str))
    return frame


def _save_features(path: Path, fm: FeatureMatrix, m: dict) -> None:
    io.write_csv(path, _features_frame(fm),
                 {**m, "manifest_version": fm.version, "n_flagged": fm.n_flagged})
    io.write_manifest(path.with_suffix(".manifest.txt"), fm.manifest, fm.version, m)


def _load_features(path: Path, stage_hash: str) -> FeatureMatrix | None:
    if not path.exists():
        return None
    m, frame = io.read_csv(path)
    if m.get("stage_hash") != stage_hash:
        return None
    manifest = io.read_manifest(path.with_suffix(".manifest.txt"))
    version = manifest_version(manifest)
    if version != m.get("manifest_version") or list(frame.columns[1:]) != [r[0] for r in manifest]:
        raise ManifestError(f"{path}: manifest does not match the cached feature table")
    return FeatureMatrix(frame["date"].to_numpy().astype("datetime64[D]"),
                         frame.iloc[:, 1:].to_numpy(dtype=np.float64), manifest, version,
                         int(m.get("n_flagged", 0)))


def stage_features(cfg: RunConfig, subset: str = "combined",
                   panel: PricePanel | None = None) -> FeatureMatrix:
    """Full feature matrix (cached); writes ``features.csv`` for ``subset``."""
    cache = _feature_cache(cfg)
    fm = _load_features(cache, cfg.stage_hash("features"))
    if fm is None:
        panel = load_data(cfg) if panel is None else panel
        fm = build_features(panel, cfg.data.index_symbol, cfg.features.indicators,
                            cfg.labels.horizon, cfg.features.warmup)
        _save_features(cache, fm, meta(cfg, "features"))
        log.info("features: %d rows x %d columns", *fm.values.shape)
    else:
        log.info("features: cache hit %s", cache.name)
    sel = fm.select(subset)
    _save_features(out_dir(cfg) / "features.csv", sel, meta(cfg, "features", subset=subset))
    return fm


def _predictions_frame(preds: dict[str, PredictionSet]) -> pd.DataFrame:
    """Long format: one row per (date, task)."""
    return pd.concat([pd.DataFrame({"date": p.dates.astype(str), "task": t, "fold": p.fold,
                                    "probability": p.probability, "label": p.label})
                      for t, p in preds.items()], ignore_index=True)


def _read_predictions(path: Path) -> dict[str, PredictionSet]:
    _, f = io.read_csv(path)
    out = {}
    for t in TASKS:
        g = f[f["task"] == t]
        if g.empty:
            raise DataError(f"{path}: no {t} predictions")
        out[t] = PredictionSet(t, g["date"].to_numpy().astype("datetime64[D]"),
                               g["probability"].to_numpy(dtype=np.float64),
                               g["label"].to_numpy(dtype=np.int64),
                               g["fold"].to_numpy(dtype=np.int64))
    if not np.array_equal(out["rally"].dates, out["crash"].dates):
        raise DataError(f"{path}: rally and crash predictions cover different dates")
    return out


def stage_evaluate(cfg: RunConfig, panel: PricePanel | None = None,
                   fm: FeatureMatrix | None = None) -> dict:
    """Walk-forward ablation over ``cfg.subsets``; writes predictions and metrics."""
    panel = load_data(cfg) if panel is None else panel
    fm = stage_features(cfg, panel=panel) if fm is None else fm
    targets = make_targets(panel, cfg.data.index_symbol, cfg.labels.horizon,
                           cfg.labels.rally_threshold, cfg.labels.crash_threshold)
    f = cfg.folds
    folds = make_folds(fm.values.shape[0], f.train_days, f.gap_days, f.test_days, f.n_folds,
                       expanding=f.expanding, strict=f.strict)
    m = meta(cfg, "evaluate")
    metrics = {"folds": [fs.as_dict(fm.dates) for fs in folds],
               "manifest_version": fm.version, "n_features_total": int(fm.values.shape[1]),
               "n_flagged_values": int(fm.n_flagged),
               "base_rate_warnings": targets.base_rate_warnings(),
               "n_feature_rows": int(fm.values.shape[0]), "configurations": {}}
    for subset in cfg.subsets:
        res = run_walk_forward(fm, targets, folds, subset, cfg.seed, cfg.learner, cfg.jobs,
                               cfg.labels.horizon)
        io.write_csv(out_dir(cfg) / f"predictions_{subset}.csv",
                     _predictions_frame(res.predictions), {**m, "subset": subset})
        metrics["configurations"][subset] = res.report
    io.write_json(out_dir(cfg) / "metrics.json", metrics, m)
    return metrics


def load_predictions(cfg: RunConfig, subset: str) -> dict[str, PredictionSet]:
    path = out_dir(cfg) / f"predictions_{subset}.csv"
    if not path.exists() or io.read_meta(path).get("stage_hash") != cfg.stage_hash("evaluate"):
        stage_evaluate(cfg)
    return _read_predictions(path)


def stage_backtest(cfg: RunConfig, panel: PricePanel | None = None) -> EnsembleResult:
    """Ensemble grid backtest on the ranked out-of-sample probabilities."""
    s = cfg.strategy
    preds = load_predictions(cfg, s.subset)
    panel = load_data(cfg) if panel is None else panel
    ranks = signal_ranks(preds["rally"].dates, preds["rally"].probability,
                         preds["crash"].probability, s.rank_window)
    if ranks.dates.shape[0] == 0:
        raise DataError("too few out-of-sample predictions to rank")
    grid = parameter_grid({k: tuple(v) for k, v in s.grid.items()})
    res = ensemble_wfo(ranks, panel, grid, s.top_k, s.in_sample_fraction, s.equity_symbol)
    m = meta(cfg, "backtest", subset=s.subset)
    io.write_csv(out_dir(cfg) / "ledger.csv", res.ledger.to_frame(), m)
    io.write_csv(out_dir(cfg) / "benchmark_ledger.csv", res.benchmark.to_frame(), m)
    report = {k: v for k, v in res.report.items() if k != "regimes"}
    counts = pd.Series(res.report["regimes"][res.split:]).value_counts()
    report["regime_days_oos"] = {k: int(counts.get(k, 0))
                                 for k in ("Normal", "Rally", "Caution", "Euphoria", "Crisis")}
    io.write_json(out_dir(cfg) / "strategy.json", report, m)
    return res


REFERENCE_CLASSIFICATION = {
    "traditional": (0.736, 0.608, 0.669, 27),
    "spectral": (0.620, 0.666, 0.643, 179),
    "combined": (0.772, 0.711, 0.741, 206),
}
REFERENCE_BACKTEST = {
    "strategy": (1.13, 0.156, -0.075, 2.09),
    "benchmark": (0.09, 0.037, -0.337, 0.11),
}


def _fmt(v, spec=".3f"):
    return "n/a" if v is None else format(v, spec)


def stage_report(cfg: RunConfig) -> str:
    """Markdown summary built from the evaluate and backtest artifacts."""
    metrics_path = out_dir(cfg) / "metrics.json"
    if not metrics_path.exists() or \
            io.read_json(metrics_path)["meta"].get("stage_hash") != cfg.stage_hash("evaluate"):
        stage_evaluate(cfg)
    strat_path = out_dir(cfg) / "strategy.json"
    if not strat_path.exists() or \
            io.read_json(strat_path)["meta"].get("stage_hash") != cfg.stage_hash("backtest"):
        stage_backtest(cfg)
    metrics = io.read_json(metrics_path)
    strat = io.read_json(strat_path)

    lines = ["# Run report", "",
             f"- config hash: `{cfg.config_hash}`",
             f"- seed: {cfg.seed}",
             f"- data: {cfg.data.path or f'synthetic (seed {cfg.data.synthetic_seed})'}",
             f"- feature rows: {metrics['n_feature_rows']}; folds: {len(metrics['folds'])}",
             ""]
    lines.append(f"- feature manifest: {metrics['n_features_total']} columns, version "
                 f"`{metrics['manifest_version']}`")
    for w in metrics["base_rate_warnings"]:
        lines.append(f"- warning: {w}")
    lines += ["", "## Fold layout", "", "| Fold | Train | Test |", "|---|---|---|"]
    for f in metrics["folds"]:
        lines.append(f"| {f['fold']} | {f['train_dates'][0]} .. {f['train_dates'][1]} "
                     f"| {f['test_dates'][0]} .. {f['test_dates'][1]} |")
    lines += ["", "## Walk-forward classification (out-of-sample, pooled)", "",
              "| Features | #Feat | Rally AUC | Crash AUC | BCD-AUC | BCD-AUC (fold mean) "
              "| Rally AP | Crash AP | Ref. rally / crash / BCD |",
              "|---|---|---|---|---|---|---|---|---|"]
    divergences = []
    for subset, rep in metrics["configurations"].items():
        t = rep["tasks"]
        ref = REFERENCE_CLASSIFICATION.get(subset)
        lines.append(
            f"| {subset} | {rep['n_features']} | {_fmt(t['rally']['auc_roc'])} "
            f"| {_fmt(t['crash']['auc_roc'])} | {_fmt(rep['bcd_auc'])} "
            f"| {_fmt(rep['bcd_auc_fold_mean'])} | {_fmt(t['rally']['average_precision'])} "
            f"| {_fmt(t['crash']['average_precision'])} "
            f"| {ref[0]:.3f} / {ref[1]:.3f} / {ref[2]:.3f} |")
        if rep["bcd_auc"] is not None and abs(rep["bcd_auc"] - ref[2]) > 0.02:
            divergences.append(f"{subset}: BCD-AUC {rep['bcd_auc']:.3f} vs reference "
                               f"{ref[2]:.3f} ({rep['bcd_auc'] - ref[2]:+.3f})")
        if rep["n_features"] != ref[3]:
            divergences.append(f"{subset}: {rep['n_features']} features vs {ref[3]} in the "
                               "reference table; the manifest here is enumerated explicitly")
        for task in ("rally", "crash"):
            if t[task]["excluded_folds"]:
                divergences.append(f"{subset}/{task}: folds {t[task]['excluded_folds']} have "
                                   "single-class test labels and are left out of the fold mean")

    lines += ["", "## Strategy backtest (out-of-sample)", "",
              f"Out-of-sample segment starts {strat['oos_start']} "
              f"({strat['out_of_sample']['n_days']} days); "
              f"top {strat['top_k']} of {strat['n_grid']} parameter sets averaged.", "",
              "| Strategy | Sharpe | CAGR | Max DD | Calmar | Ref. Sharpe / CAGR / Max DD / Calmar |",
              "|---|---|---|---|---|---|"]
    for key, name, ref in (("out_of_sample", "Ensemble WFO", REFERENCE_BACKTEST["strategy"]),
                           ("benchmark_out_of_sample", "Buy & hold",
                            REFERENCE_BACKTEST["benchmark"])):
        s = strat[key]
        lines.append(f"| {name} | {_fmt(s['sharpe'], '.2f')} | {_fmt(s['cagr'], '.1%')} "
                     f"| {_fmt(s['max_drawdown'], '.1%')} | {_fmt(_num(s['calmar']), '.2f')} "
                     f"| {ref[0]:.2f} / {ref[1]:.1%} / {ref[2]:.1%} / {ref[3]:.2f} |")
    lines += ["", "Regime days (out-of-sample): " +
              ", ".join(f"{k} {v}" for k, v in strat["regime_days_oos"].items()), ""]
    cond = strat.get("euphoria_conditional_return_in_sample")
    lines.append("Annualised equity return on in-sample days with rally rank >= 0.90: "
                 + ("n/a" if cond is None else f"{cond:.1%}"))
    oos = strat["out_of_sample"]["sharpe"]
    if abs(oos - REFERENCE_BACKTEST["strategy"][0]) > 0.25:
        divergences.append(f"strategy Sharpe {oos:.2f} vs reference "
                           f"{REFERENCE_BACKTEST['strategy'][0]:.2f}")
    lines += ["", "## Divergence notes", ""]
    lines += [f"- {d}" for d in divergences] or ["- none above the reporting thresholds"]
    lines += ["- reference values come from a proprietary vendor panel with an unpublished "
              "feature list; no numeric agreement is expected on other data",
              "", "## Configuration", "", "```yaml", dump_config(cfg).rstrip(), "```", ""]
    text = "\n".join(lines)
    path = out_dir(cfg) / "report.md"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return text


def _num(v):
    if isinstance(v, str):
        return float(v)
    return v


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    """Apply CLI overrides (``None`` leaves a setting alone)."""
    data, folds = cfg.data, cfg.folds
    if kw.get("universe"):
        u = kw["universe"]
        if "," in u:
            u = tuple(x.strip() for x in u.split(",") if x.strip())
        elif u not in data.universes:
            raise ConfigError(f"unknown universe {u!r}; configured: {sorted(data.universes)}")
        data = replace(data, universe=u)
    if kw.get("strict"):
        folds = replace(folds, strict=True)
    if kw.get("expanding"):
        folds = replace(folds, expanding=True)
    top = {k: kw[k] for k in ("seed", "jobs", "out") if kw.get(k) is not None}
    return replace(cfg, data=data, folds=folds, **top).validate()
