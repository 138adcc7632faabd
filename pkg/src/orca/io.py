"""Artifact files: CSV with a ``# key=value`` header block, JSON, manifest sidecars."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError

FLOAT_FORMAT = "%.17g"  # round-trips float64 exactly


def write_csv(path: str | Path, frame: pd.DataFrame, meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = "".join(f"# {k}={meta[k]}\n" for k in sorted(meta))
    body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    path.write_text(header + body)
    return path


def read_meta(path: str | Path) -> dict:
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].rstrip("\n").partition("=")
            meta[key] = value
    return meta


def read_csv(path: str | Path) -> tuple[dict, pd.DataFrame]:
    try:
        meta = read_meta(path)
        frame = pd.read_csv(path, comment="#", float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    return meta, frame


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def write_json(path: str | Path, obj: dict, meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"meta": dict(sorted(meta.items())), **obj}
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


def write_manifest(path: str | Path, manifest, version: str, meta: dict) -> Path:
    """One ``name<TAB>family<TAB>estimator`` line per column, in column order."""
    path = Path(path)
    lines = [f"# {k}={v}" for k, v in sorted({**meta, "manifest_version": version}.items())]
    lines.append("name\tfamily\testimator")
    lines += ["\t".join(row) for row in manifest]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_manifest(path: str | Path) -> tuple[tuple[str, str, str], ...]:
    rows = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    return tuple(tuple(r.split("\t")) for r in rows[1:])
