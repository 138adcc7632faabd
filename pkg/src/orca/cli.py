"""Command-line entry point: ``orca {features,evaluate,backtest,report,synth}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import pipeline
from ._accel import backend
from .config import load_config
from .errors import OrcaError
from .features import SUBSETS
from .io import write_csv
from .synthetic import SyntheticSpec, synthetic_panel

log = logging.getLogger("orca")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML run configuration (defaults apply to missing keys)")
    p.add_argument("--seed", type=int, help="learner seed (overrides the config)")
    p.add_argument("--jobs", type=int, help="worker processes for walk-forward folds")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--universe",
                   help="named universe from the config's data.universes, or a "
                        "comma-separated symbol list")
    p.add_argument("--strict", action="store_true",
                   help="fail instead of dropping folds that do not fit the history")
    p.add_argument("--expanding", action="store_true",
                   help="expanding instead of rolling training windows")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orca", description="Correlation-spectrum regime features, walk-forward "
        "rally/crash classifiers and a risk-on/risk-off backtest.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="build and cache the feature matrix")
    _common(p)
    p.add_argument("--subset", choices=SUBSETS, default="combined",
                   help="feature family written to features.csv")

    p = sub.add_parser("evaluate", help="walk-forward evaluation and ablation")
    _common(p)
    p.add_argument("--subset", choices=SUBSETS,
                   help="evaluate only this feature family")

    p = sub.add_parser("backtest", help="ensemble grid backtest on out-of-sample signals")
    _common(p)
    p.add_argument("--subset", choices=SUBSETS, help="feature family driving the signals")

    p = sub.add_parser("report", help="write report.md (runs missing stages)")
    _common(p)

    p = sub.add_parser("synth", help="write a synthetic price panel CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--days", type=int, default=SyntheticSpec.n_days)
    p.add_argument("--out", required=True, help="CSV path")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _configure(args):
    cfg = load_config(args.config)
    cfg = pipeline.with_overrides(cfg, seed=args.seed, jobs=args.jobs, out=args.out,
                                  universe=args.universe, strict=args.strict,
                                  expanding=args.expanding)
    subset = getattr(args, "subset", None)
    if subset and args.command in ("evaluate", "backtest"):
        subsets = cfg.subsets if subset in cfg.subsets else (*cfg.subsets, subset)
        if args.command == "evaluate":
            subsets = (subset,)
        cfg = replace(cfg, subsets=subsets, strategy=replace(cfg.strategy, subset=subset))
        cfg = cfg.validate()
    return cfg


def run(args) -> int:
    if args.command == "synth":
        panel, truth = synthetic_panel(args.seed, SyntheticSpec(n_days=args.days))
        frame = panel.to_frame()
        frame.index = frame.index.strftime("%Y-%m-%d")
        frame.index.name = "date"
        write_csv(args.out, frame.reset_index(),
                  {"generator": "synthetic", "seed": args.seed, "days": args.days,
                   "crash_rows": " ".join(map(str, truth.crash_starts))})
        print(args.out)
        return 0

    cfg = _configure(args)
    log.info("config hash %s, backend %s", cfg.config_hash, backend())
    if args.command == "features":
        fm = pipeline.stage_features(cfg, args.subset)
        print(f"{fm.select(args.subset).values.shape[0]} rows x "
              f"{fm.select(args.subset).values.shape[1]} columns -> {cfg.out}/features.csv")
    elif args.command == "evaluate":
        metrics = pipeline.stage_evaluate(cfg)
        for subset, rep in metrics["configurations"].items():
            t = rep["tasks"]
            print(f"{subset:12s} rally AUC {_f(t['rally']['auc_roc'])}  crash AUC "
                  f"{_f(t['crash']['auc_roc'])}  BCD-AUC {_f(rep['bcd_auc'])}")
    elif args.command == "backtest":
        res = pipeline.stage_backtest(cfg)
        for key in ("out_of_sample", "benchmark_out_of_sample"):
            s = res.report[key]
            print(f"{key:24s} Sharpe {s['sharpe']:.2f}  CAGR {s['cagr']:.1%}  "
                  f"MaxDD {s['max_drawdown']:.1%}  Calmar {s['calmar']:.2f}")
    elif args.command == "report":
        pipeline.stage_report(cfg)
        print(f"{cfg.out}/report.md")
    return 0


def _f(v):
    return "n/a" if v is None else f"{v:.3f}"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except OrcaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
