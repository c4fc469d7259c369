"""Deterministic CSV output and JSON metadata sidecars."""
from __future__ import annotations

import csv
import datetime as _dt
import json
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .runners import COLUMNS, ResultTable

SCHEMA = ("# schema: series=str; time_gamma=float [1/Gamma]; "
          "time_tau=float [tau = 0.04 Delta^2/(Gamma Omega^2)], blank when undefined; "
          "observable=str; k_x,k_z=float [1/lambda], blank when not a mode observable; "
          "value=float; error=float (standard error), blank for deterministic solvers")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if np.isnan(v) else format(v, ".15g")
    return str(v)


def write_csv(table: ResultTable, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(SCHEMA + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in table.rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_sidecar(path, config: dict, seed, wall_time: float, extra=None) -> Path:
    meta = {
        "config": config,
        "seed": seed,
        "code_version": __version__,
        "wall_time_s": wall_time,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    if extra:
        meta.update(extra)
    path = Path(path)
    path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path


def read_csv(path):
    """Rows of a result CSV as dicts (schema comment skipped)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))
