"""Eigen, eigenvector, graph-topology, aggregate and dynamics features."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .correlation import ESTIMATORS, CorrelationSnapshot
from .errors import NumericalError
from .kernels.jacobi import jacobi_eigh
from .kernels.ranks import trailing_rank

RATIO_CAP = 1e6
TINY_EIG = 1e-12
Z_STD_FLOOR = 1e-12
THRESHOLDS = (0.3, 0.5, 0.7)
HORIZONS = (5, 10, 20)
PCT_WINDOW = 252
DYNAMICS_ESTIMATOR = ESTIMATORS[0]
KEY_QUANTITIES = (
    "lambda_1",
    "lambda_1_ratio",
    "ar_1",
    "eigen_entropy",
    "effective_rank",
    "mean_abs_corr",
    "edge_density_t50",
    "clustering_coef_t50",
)


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray  # descending, >= 0
    first_eigenvector: np.ndarray


def eigendecompose(snapshot: CorrelationSnapshot | np.ndarray, as_of=None) -> Spectrum:
    if isinstance(snapshot, CorrelationSnapshot):
        matrix, as_of = snapshot.matrix, snapshot.as_of
    else:
        matrix = np.asarray(snapshot, dtype=np.float64)
    w, v, converged, sweeps = jacobi_eigh(matrix)
    if not converged:
        raise NumericalError(f"Jacobi eigensolver did not converge in {sweeps} sweeps "
                             f"(as of {as_of})")
    order = np.argsort(-w, kind="stable")
    w = np.maximum(w[order], 0.0)
    v1 = v[:, order[0]].copy()
    v1 /= np.linalg.norm(v1)
    if v1[np.argmax(np.abs(v1))] < 0:
        v1 = -v1
    return Spectrum(w, v1)


def _capped_ratio(num: float, den: float) -> float:
    if den < TINY_EIG:
        return RATIO_CAP
    return min(num / den, RATIO_CAP)


def _moments(x: np.ndarray) -> tuple[float, float, float]:
    """Population std, skewness and excess kurtosis; shape terms are 0 for constant x."""
    d = x - x.mean()
    m2 = float(np.mean(d * d))
    sd = np.sqrt(m2)
    if sd < 1e-12:
        return sd, 0.0, 0.0
    return sd, float(np.mean(d ** 3)) / sd ** 3, float(np.mean(d ** 4)) / m2 ** 2 - 3.0


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def eigen_features(spectrum: Spectrum, effective_T: int) -> dict[str, float]:
    lam = spectrum.eigenvalues
    n = lam.shape[0]
    total = lam.sum()
    share = lam / total
    cum = np.cumsum(share)
    h = _entropy(share)
    sd, skew, kurt = _moments(lam)
    return {
        "lambda_1": float(lam[0]),
        "lambda_1_ratio": float(share[0]),
        "ar_1": float(cum[0]),
        "ar_3": float(cum[min(3, n) - 1]),
        "ar_5": float(cum[min(5, n) - 1]),
        "eigen_entropy": h,
        "effective_rank": float(np.exp(h)),
        "spectral_gap": _capped_ratio(lam[0], lam[1]),
        "condition_number": _capped_ratio(lam[0], lam[-1]),
        "mp_excess": float(lam[0] - (1.0 + np.sqrt(n / effective_T)) ** 2),
        "eigen_std": sd,
        "eigen_skew": skew,
        "eigen_kurt": kurt,
    }


def eigenvector_features(spectrum: Spectrum) -> dict[str, float]:
    a = np.abs(spectrum.first_eigenvector)
    vbar = a / a.sum()
    q = max(1, vbar.shape[0] // 4)
    s = np.sort(vbar)
    return {
        "loading_hhi": float(np.sum(vbar * vbar)),
        "loading_entropy": _entropy(vbar),
        "loading_max": float(vbar.max()),
        "loading_dispersion": float(s[-q:].mean() - s[:q].mean()),
    }


def adjacency(matrix: np.ndarray, tau: float) -> np.ndarray:
    a = (np.abs(matrix) > tau).astype(np.int64)
    np.fill_diagonal(a, 0)
    return a


def graph_features(a: np.ndarray) -> dict[str, float]:
    """Degree statistics, Freeman centralisation and global clustering of ``a``."""
    n = a.shape[0]
    deg = a.sum(axis=1)
    n_edges = deg.sum() / 2
    closed = np.sum((a @ a) * a) / 2  # sum_i sum_{j<k} a_ij a_jk a_ik
    triples = float(np.sum(deg * (deg - 1) / 2))
    central = float(np.sum(deg.max() - deg)) / ((n - 1) * (n - 2)) if n > 2 else 0.0
    # integer moments keep the variance an exact ratio before the one rounding
    var_num = int(n * np.sum(deg * deg) - deg.sum() ** 2)
    return {
        "edge_density": float(2 * n_edges / (n * (n - 1))),
        "mean_degree": float(deg.mean()),
        "degree_std": float(np.sqrt(var_num / (n * n))),
        "max_degree": float(deg.max()),
        "isolated_nodes": float(np.sum(deg == 0)),
        "degree_centralisation": central,
        "clustering_coef": float(closed) / triples if triples > 0 else 0.0,
    }


def aggregate_features(matrix: np.ndarray) -> dict[str, float]:
    iu = np.triu_indices(matrix.shape[0], k=1)
    x = np.abs(matrix[iu])
    sd, skew, _ = _moments(x)
    return {
        "mean_abs_corr": float(x.mean()),
        "median_abs_corr": float(np.median(x)),
        "max_abs_corr": float(x.max()),
        "abs_corr_std": sd,
        "abs_corr_skew": skew,
        "frac_corr_gt_50": float(np.mean(x > 0.5)),
        "frac_corr_gt_70": float(np.mean(x > 0.7)),
    }


def topology_features(snapshot: CorrelationSnapshot | np.ndarray) -> dict[str, float]:
    matrix = snapshot.matrix if isinstance(snapshot, CorrelationSnapshot) else snapshot
    out: dict[str, float] = {}
    for tau in THRESHOLDS:
        tag = f"t{round(tau * 100)}"
        for name, val in graph_features(adjacency(matrix, tau)).items():
            out[f"{name}_{tag}"] = val
    out.update(aggregate_features(matrix))
    return out


FAMILY_OF = {
    **{k: "eigen" for k in ("lambda_1", "lambda_1_ratio", "ar_1", "ar_3", "ar_5",
                            "eigen_entropy", "effective_rank", "spectral_gap",
                            "condition_number", "mp_excess", "eigen_std", "eigen_skew",
                            "eigen_kurt")},
    **{k: "eigenvector" for k in ("loading_hhi", "loading_entropy", "loading_max",
                                  "loading_dispersion")},
    **{k: "aggregate" for k in ("mean_abs_corr", "median_abs_corr", "max_abs_corr",
                                "abs_corr_std", "abs_corr_skew", "frac_corr_gt_50",
                                "frac_corr_gt_70")},
}


def static_features(snapshot: CorrelationSnapshot) -> dict[str, float]:
    spec = eigendecompose(snapshot)
    out = eigen_features(spec, snapshot.effective_T)
    out.update(eigenvector_features(spec))
    out.update(topology_features(snapshot))
    return out


class DynamicsState:
    """Date-ordered history of the key spectral quantities."""

    def __init__(self, quantities=KEY_QUANTITIES):
        self.quantities = tuple(quantities)
        self.dates: list[np.datetime64] = []
        self._rows: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self.dates)

    def append(self, as_of, values: dict[str, float]) -> None:
        as_of = np.datetime64(as_of, "D")
        if self.dates and as_of <= self.dates[-1]:
            raise ValueError(f"dynamics history must grow in date order ({as_of})")
        self.dates.append(as_of)
        self._rows.append(np.array([values[q] for q in self.quantities], dtype=np.float64))

    def history(self, as_of) -> np.ndarray:
        """(k, n_quantities) values up to and including ``as_of``."""
        as_of = np.datetime64(as_of, "D")
        k = int(np.searchsorted(np.asarray(self.dates), as_of, side="right"))
        if k == 0 or self.dates[k - 1] != as_of:
            raise KeyError(f"{as_of} not in dynamics history")
        return np.asarray(self._rows[:k])


def dynamics_names(quantities=KEY_QUANTITIES) -> list[str]:
    names = []
    for q in quantities:
        for h in HORIZONS:
            names += [f"{q}_roc_{h}d", f"{q}_diff_{h}d", f"{q}_z_{h}d"]
        names += [f"{q}_accel", f"{q}_pct_{PCT_WINDOW}d"]
    return names


def dynamics_features(state: DynamicsState, as_of) -> tuple[dict[str, float], set[str]]:
    """Rate-of-change, difference, z-score, acceleration and percentile rank.

    Returns the features and the names that fell back to 0 (short history or
    zero base value for a rate of change).
    """
    hist = state.history(as_of)
    k = hist.shape[0]
    out: dict[str, float] = {}
    flagged: set[str] = set()
    for j, q in enumerate(state.quantities):
        x = hist[:, j]
        cur = x[-1]
        for h in HORIZONS:
            roc, diff, z = f"{q}_roc_{h}d", f"{q}_diff_{h}d", f"{q}_z_{h}d"
            if k > h:
                base = x[-1 - h]
                diff_v = cur - base
                if base == 0.0:
                    out[roc] = 0.0
                    flagged.add(roc)
                else:
                    out[roc] = cur / base - 1.0
                out[diff] = diff_v
            else:
                out[roc] = out[diff] = 0.0
                flagged.update((roc, diff))
            if k >= 2 * h:
                dev = cur - x[-2 * h:]  # exact zeros on a constant history
                out[z] = dev.mean() / max(dev.std(), Z_STD_FLOOR)
            else:
                out[z] = 0.0
                flagged.add(z)
        acc, pct = f"{q}_accel", f"{q}_pct_{PCT_WINDOW}d"
        if k >= 3:
            out[acc] = (x[-1] - x[-2]) - (x[-2] - x[-3])
        else:
            out[acc] = 0.0
            flagged.add(acc)
        if k >= PCT_WINDOW:
            out[pct] = float(trailing_rank(x[-PCT_WINDOW:], PCT_WINDOW)[-1])
        else:
            out[pct] = 0.0
            flagged.add(pct)
    return out, flagged


@dataclass(frozen=True, eq=False)
class FeatureRow:
    as_of: np.datetime64
    names: tuple[str, ...]
    values: np.ndarray
    manifest_version: str
    flagged: frozenset[str] = field(default=frozenset())


def static_names() -> list[str]:
    eye = np.eye(4)
    snap = CorrelationSnapshot(eye, "probe", np.datetime64("2000-01-03"), 60)
    return list(static_features(snap))


def spectral_manifest() -> list[tuple[str, str, str]]:
    """(name, family, estimator) for every spectral column, in row order."""
    rows = []
    for est in ESTIMATORS:
        for name in static_names():
            family = FAMILY_OF.get(name, "topology")
            rows.append((f"{est}_{name}", family, est))
    for name in dynamics_names():
        rows.append((f"{DYNAMICS_ESTIMATOR}_{name}", "dynamics", DYNAMICS_ESTIMATOR))
    return rows


def assemble_spectral_row(snapshots, state: DynamicsState, manifest_version: str = "",
                          statics: list[dict[str, float]] | None = None) -> FeatureRow:
    """Concatenate per-estimator static features and the dynamics block.

    ``state`` must already contain the key quantities through the snapshots'
    date. ``statics`` may carry precomputed static features.
    """
    as_of = snapshots[0].as_of
    if any(s.as_of != as_of for s in snapshots):
        raise ValueError("snapshots must share as_of")
    if [s.estimator for s in snapshots] != list(ESTIMATORS):
        raise ValueError(f"snapshots must be ordered {ESTIMATORS}")
    if statics is None:
        statics = [static_features(s) for s in snapshots]
    names: list[str] = []
    values: list[float] = []
    for s, feats in zip(snapshots, statics):
        names += [f"{s.estimator}_{k}" for k in feats]
        values += list(feats.values())
    dyn, flagged = dynamics_features(state, as_of)
    names += [f"{DYNAMICS_ESTIMATOR}_{k}" for k in dyn]
    values += list(dyn.values())
    flagged = frozenset(f"{DYNAMICS_ESTIMATOR}_{k}" for k in flagged)
    return FeatureRow(as_of, tuple(names), np.asarray(values, dtype=np.float64),
                      manifest_version, flagged)
