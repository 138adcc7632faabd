"""Assemble the full date-indexed feature matrix and its manifest."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass

import numpy as np

from .correlation import snapshots_at
from .data import PricePanel
from .errors import ConfigError, ManifestError
from .spectral import (
    DYNAMICS_ESTIMATOR,
    KEY_QUANTITIES,
    DynamicsState,
    assemble_spectral_row,
    spectral_manifest,
    static_features,
)
from .traditional import IndicatorConfig, feature_names, traditional_matrix

log = logging.getLogger(__name__)

WARMUP = 120
LABEL_HORIZON = 10
SUBSETS = ("traditional", "spectral", "combined")


def manifest_version(manifest) -> str:
    text = "\n".join("|".join(row) for row in manifest)
    return "m1-" + hashlib.sha256(text.encode()).hexdigest()[:12]


def full_manifest(cfg: IndicatorConfig = IndicatorConfig()) -> list[tuple[str, str, str]]:
    return spectral_manifest() + [(n, "traditional", "index") for n in feature_names(cfg)]


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    dates: np.ndarray
    values: np.ndarray  # (N, d)
    manifest: tuple[tuple[str, str, str], ...]
    version: str
    n_flagged: int = 0

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(m[0] for m in self.manifest)

    def columns(self, subset: str) -> np.ndarray:
        if subset not in SUBSETS:
            raise ConfigError(f"unknown feature subset {subset!r}; choose from {SUBSETS}")
        fam = np.array([m[1] for m in self.manifest])
        if subset == "combined":
            return np.arange(len(fam))
        trad = fam == "traditional"
        return np.flatnonzero(trad if subset == "traditional" else ~trad)

    def select(self, subset: str) -> "FeatureMatrix":
        cols = self.columns(subset)
        manifest = tuple(self.manifest[i] for i in cols)
        return FeatureMatrix(self.dates, self.values[:, cols], manifest,
                             manifest_version(manifest), self.n_flagged)


def build_features(panel: PricePanel, index_symbol: str,
                   cfg: IndicatorConfig = IndicatorConfig(),
                   horizon: int = LABEL_HORIZON, warmup: int = WARMUP) -> FeatureMatrix:
    """Feature rows for price dates ``warmup .. T - 1 - horizon``.

    Static spectral features are computed date by date, the dynamics block in
    one sequential pass. Non-finite values are replaced with 0 and counted.
    """
    warmup = max(warmup, cfg.min_history - 1)
    positions = np.arange(warmup, panel.dates.shape[0] - horizon)
    manifest = tuple(full_manifest(cfg))
    version = manifest_version(manifest)
    spectral_names = [m[0] for m in manifest if m[1] != "traditional"]
    _, trad = traditional_matrix(panel, index_symbol, cfg)

    state = DynamicsState(KEY_QUANTITIES)
    rows = np.empty((positions.shape[0], len(manifest)))
    n_flagged = 0
    for k, pos in enumerate(positions):
        snaps = snapshots_at(panel, pos)
        statics = [static_features(s) for s in snaps]
        key = statics[[s.estimator for s in snaps].index(DYNAMICS_ESTIMATOR)]
        state.append(snaps[0].as_of, {q: key[q] for q in KEY_QUANTITIES})
        row = assemble_spectral_row(snaps, state, version, statics)
        if list(row.names) != spectral_names:
            raise ManifestError(f"feature manifest drift at {row.as_of}")
        rows[k, :len(spectral_names)] = row.values
        rows[k, len(spectral_names):] = trad[pos]
        n_flagged += len(row.flagged)
    bad = ~np.isfinite(rows)
    if bad.any():
        log.warning("%d non-finite feature values replaced with 0", int(bad.sum()))
        rows[bad] = 0.0
    return FeatureMatrix(panel.dates[positions], rows, manifest, version,
                         n_flagged + int(bad.sum()))
