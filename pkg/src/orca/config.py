"""Run configuration: one YAML file, validated into frozen dataclasses."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .correlation import ESTIMATORS
from .data import MIN_ROWS, PAPER_UNIVERSE
from .errors import ConfigError
from .features import LABEL_HORIZON, SUBSETS, WARMUP
from .forest import ForestParams
from .kernels.backtest import PARAM_COLUMNS
from .labels import CRASH_THRESHOLD, GAP_DAYS, N_FOLDS, RALLY_THRESHOLD, TEST_DAYS, TRAIN_DAYS
from .strategy import GRID_AXES, IN_SAMPLE_FRACTION, RANK_WINDOW, TOP_K
from .traditional import IndicatorConfig


@dataclass(frozen=True)
class DataConfig:
    path: str | None = None
    synthetic_seed: int | None = None  # used when ``path`` is empty
    synthetic_days: int = 3000
    universe: tuple[str, ...] | str = "paper"  # a name from ``universes`` or a symbol list
    universes: dict = field(default_factory=lambda: {"paper": list(PAPER_UNIVERSE)})
    index_symbol: str = "SPY"
    min_rows: int = MIN_ROWS


@dataclass(frozen=True)
class FeatureConfig:
    estimators: tuple[str, ...] = ESTIMATORS
    warmup: int = WARMUP
    indicators: IndicatorConfig = IndicatorConfig()


@dataclass(frozen=True)
class LabelConfig:
    horizon: int = LABEL_HORIZON
    rally_threshold: float = RALLY_THRESHOLD
    crash_threshold: float = CRASH_THRESHOLD


@dataclass(frozen=True)
class FoldConfig:
    train_days: int = TRAIN_DAYS
    gap_days: int = GAP_DAYS
    test_days: int = TEST_DAYS
    n_folds: int = N_FOLDS
    expanding: bool = False
    strict: bool = False


@dataclass(frozen=True)
class StrategyConfig:
    subset: str = "combined"
    equity_symbol: str = "SPY"
    rank_window: int = RANK_WINDOW
    top_k: int = TOP_K
    in_sample_fraction: float = IN_SAMPLE_FRACTION
    grid: dict = field(default_factory=lambda: {k: list(v) for k, v in GRID_AXES.items()})


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = DataConfig()
    features: FeatureConfig = FeatureConfig()
    labels: LabelConfig = LabelConfig()
    folds: FoldConfig = FoldConfig()
    learner: ForestParams = ForestParams()
    seed: int = 0
    subsets: tuple[str, ...] = SUBSETS
    strategy: StrategyConfig = StrategyConfig()
    out: str = "orca-out"
    jobs: int = 1

    def validate(self) -> "RunConfig":
        d = self.data
        if isinstance(d.universe, str):
            if d.universe not in d.universes:
                raise ConfigError(f"unknown universe {d.universe!r}; "
                                  f"configured: {sorted(d.universes)}")
            return replace(self, data=replace(d, universe=tuple(d.universes[d.universe]))).validate()
        if not d.path and d.synthetic_seed is None:
            raise ConfigError("data.path is required (or set data.synthetic_seed)")
        if d.index_symbol not in d.universe:
            raise ConfigError(f"index symbol {d.index_symbol} not in universe")
        if self.strategy.equity_symbol not in d.universe:
            raise ConfigError(f"equity symbol {self.strategy.equity_symbol} not in universe")
        if len(set(d.universe)) != len(d.universe) or len(d.universe) < 2:
            raise ConfigError("universe must list at least two distinct symbols")
        if tuple(self.features.estimators) != ESTIMATORS:
            raise ConfigError(f"features.estimators must be {list(ESTIMATORS)}")
        bad = [s for s in (*self.subsets, self.strategy.subset) if s not in SUBSETS]
        if bad:
            raise ConfigError(f"unknown feature subset(s): {bad}; choose from {list(SUBSETS)}")
        if self.strategy.subset not in self.subsets:
            raise ConfigError(f"strategy.subset {self.strategy.subset} is not evaluated")
        unknown = set(self.strategy.grid) - set(PARAM_COLUMNS)
        if unknown:
            raise ConfigError(f"unknown strategy.grid axes: {sorted(unknown)}")
        if any(len(v) == 0 for v in self.strategy.grid.values()):
            raise ConfigError("strategy.grid axes must be non-empty")
        if not 0.0 < self.strategy.in_sample_fraction < 1.0:
            raise ConfigError("strategy.in_sample_fraction must lie in (0, 1)")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.labels.horizon < 1 or self.folds.gap_days < self.labels.horizon:
            raise ConfigError("folds.gap_days must be at least labels.horizon")
        return self

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def stage_hash(self, stage: str) -> str:
        """Hash of the settings a stage's artifacts depend on."""
        d = self.to_dict()
        parts = {"data": d["data"], "features": d["features"], "data_digest": data_digest(self)}
        if stage in ("evaluate", "backtest"):
            parts.update(labels=d["labels"], folds=d["folds"], learner=d["learner"],
                         seed=d["seed"], subsets=d["subsets"])
        if stage == "backtest":
            parts.update(strategy=d["strategy"])
        return _digest(parts)

    @property
    def config_hash(self) -> str:
        return _digest({"config": self.to_dict(), "data_digest": data_digest(self)})


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def data_digest(cfg: RunConfig) -> str:
    """Content hash of the price file, or of the generator settings."""
    if cfg.data.path:
        try:
            return hashlib.sha256(Path(cfg.data.path).read_bytes()).hexdigest()[:16]
        except OSError as exc:
            raise ConfigError(f"cannot read data.path {cfg.data.path}: {exc.strerror}") from None
    return f"synthetic-{cfg.data.synthetic_seed}-{cfg.data.synthetic_days}"


def _build(cls, raw, where: str):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name: f for f in fields(cls)}
    extra = set(raw) - set(known)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {sorted(extra)}")
    kw = {}
    for name, value in raw.items():
        default = getattr(cls(), name) if name not in ("grid", "universes") else None
        if isinstance(default, IndicatorConfig) or isinstance(default, ForestParams):
            kw[name] = _build(type(default), value, f"{where}.{name}")
        elif isinstance(default, tuple):
            kw[name] = _tuple(value)
        else:
            kw[name] = value
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _tuple(v):
    if isinstance(v, (list, tuple)):
        return tuple(_tuple(x) for x in v)
    return v


SECTIONS = {"data": DataConfig, "features": FeatureConfig, "labels": LabelConfig,
            "folds": FoldConfig, "learner": ForestParams, "strategy": StrategyConfig}


def config_from_dict(raw: dict | None, where: str = "config") -> RunConfig:
    raw = dict(raw or {})
    extra = set(raw) - set(SECTIONS) - {"seed", "subsets", "out", "jobs"}
    if extra:
        raise ConfigError(f"{where}: unknown section(s) {sorted(extra)}")
    kw = {k: _build(cls, raw.get(k), f"{where}.{k}") for k, cls in SECTIONS.items()}
    for k in ("seed", "out", "jobs"):
        if k in raw:
            kw[k] = raw[k]
    if "subsets" in raw:
        kw["subsets"] = _tuple(raw["subsets"])
    return RunConfig(**kw).validate()


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return config_from_dict({}, "defaults")
    p = Path(path)
    try:
        raw = yaml.safe_load(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: invalid YAML ({exc})") from None
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    cfg = config_from_dict(raw, str(p))
    if cfg.data.path and not Path(cfg.data.path).is_absolute():
        # data paths are relative to the config file
        cfg = replace(cfg, data=replace(cfg.data, path=str(p.parent / cfg.data.path)))
    return cfg


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
